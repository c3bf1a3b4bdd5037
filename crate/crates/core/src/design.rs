//! The design loop: an optimizer proposes modulation parameters, a backend
//! scores them, and the oracle verifies the winner.
//!
//! The objective is `metric + w ((P - P_a) / P_r)^2`, evaluated at the rated
//! input voltage and the actual output voltage. After the search the outer
//! shift is trimmed on the oracle so that the delivered power meets `P_a`
//! with the inner shifts held fixed.

use std::fmt;
use std::str::FromStr;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::converter::{ModulationParams, ModulationStrategy, PhaseShiftTuple};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_performance, DcLink, Oracle, PerformanceEvaluator, PerformanceReport};
use crate::optim::{optimize, Algorithm, Bounds, OptimConfig};
use crate::sim::{CircuitParams, OperatingConditions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Objective {
    CurrentStress,
    ConductionLoss,
    ZvsCount,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::CurrentStress, Objective::ConductionLoss, Objective::ZvsCount];

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::CurrentStress => "CURRENT_STRESS",
            Objective::ConductionLoss => "CONDUCTION_LOSS",
            Objective::ZvsCount => "ZVS_COUNT",
        }
    }

    /// Quantity minimized, in the units of the report.
    pub fn metric(self, report: &PerformanceReport) -> f64 {
        match self {
            Objective::CurrentStress => report.current_stress,
            Objective::ConductionLoss => report.conduction_loss,
            Objective::ZvsCount => (report.zvs.len() - report.zvs_count()) as f64,
        }
    }

    /// Typical magnitude of the metric, used to weight the power penalty.
    pub fn scale(self, conditions: &OperatingConditions) -> f64 {
        match self {
            Objective::CurrentStress => conditions.rated_power / conditions.rated_input_voltage,
            Objective::ConductionLoss => 0.01 * conditions.rated_power,
            Objective::ZvsCount => 1.0,
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Objective {
    type Err = Error;

    /// Accepts the canonical names and the plain phrases a user would type
    /// ("current stress", "efficiency", "soft switching").
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == '-' || c == ' ' { '_' } else { c })
            .collect();
        match key.as_str() {
            "current_stress" | "stress" => Ok(Objective::CurrentStress),
            "conduction_loss" | "efficiency" | "loss" => Ok(Objective::ConductionLoss),
            "zvs_count" | "zvs" | "soft_switching" => Ok(Objective::ZvsCount),
            _ => Err(Error::InvalidParams(format!(
                "unknown objective '{s}' (expected CURRENT_STRESS, CONDUCTION_LOSS or ZVS_COUNT)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BackendKind {
    Oracle,
    Surrogate,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Oracle => "ORACLE",
            BackendKind::Surrogate => "SURROGATE",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "oracle" => Ok(BackendKind::Oracle),
            "surrogate" => Ok(BackendKind::Surrogate),
            _ => Err(Error::InvalidParams(format!(
                "unknown backend '{s}' (expected oracle or surrogate)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub strategy: ModulationStrategy,
    pub objective: Objective,
    pub conditions: OperatingConditions,
    pub algorithm: Algorithm,
    pub backend: BackendKind,
    pub circuit: CircuitParams,
    /// Objective evaluations per searched strategy.
    pub budget: usize,
    pub population: usize,
    pub seed: u64,
    /// Penalty weight in units of the objective scale.
    pub penalty_factor: f64,
    /// 0 runs every evaluation on the calling thread.
    pub threads: usize,
}

impl DesignSpec {
    pub const DEFAULT_BUDGET: usize = 3000;
    pub const DEFAULT_POPULATION: usize = 30;
    pub const DEFAULT_PENALTY: f64 = 1e3;

    pub fn new(
        strategy: ModulationStrategy,
        objective: Objective,
        conditions: OperatingConditions,
        algorithm: Algorithm,
    ) -> Self {
        Self {
            strategy,
            objective,
            conditions,
            algorithm,
            backend: BackendKind::Oracle,
            circuit: CircuitParams::default(),
            budget: Self::DEFAULT_BUDGET,
            population: Self::DEFAULT_POPULATION,
            seed: 0,
            penalty_factor: Self::DEFAULT_PENALTY,
            threads: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.conditions.validate()?;
        self.circuit.validate()?;
        if self.population < 4 {
            return Err(Error::out_of_range("population", self.population as f64, ">= 4"));
        }
        if self.budget < self.population {
            return Err(Error::out_of_range(
                "budget",
                self.budget as f64,
                "budget >= population",
            ));
        }
        if !(self.penalty_factor > 0.0) {
            return Err(Error::out_of_range("penalty_factor", self.penalty_factor, "(0, inf)"));
        }
        Ok(())
    }

    pub fn link(&self) -> DcLink {
        DcLink {
            v1: self.conditions.rated_input_voltage,
            v2: self.conditions.actual_output_voltage,
        }
    }

    pub fn penalty_weight(&self) -> f64 {
        self.penalty_factor * self.objective.scale(&self.conditions)
    }

    pub fn with_power(&self, power: f64) -> Self {
        let mut s = self.clone();
        s.conditions.actual_power = power;
        s
    }

    fn candidates(&self) -> Vec<ModulationStrategy> {
        if self.strategy == ModulationStrategy::Hybrid {
            ModulationStrategy::HYBRID_CANDIDATES.to_vec()
        } else {
            vec![self.strategy]
        }
    }
}

/// Objective value of an already evaluated candidate.
pub fn score(spec: &DesignSpec, report: &PerformanceReport) -> f64 {
    let c = &spec.conditions;
    let rel = (report.average_power - c.actual_power) / c.rated_power;
    spec.objective.metric(report) + spec.penalty_weight() * rel * rel
}

/// The penalized objective over the box of `strategy` (a concrete, non-hybrid
/// strategy). Backend failures score `+inf`.
pub fn make_objective<'a>(
    spec: &'a DesignSpec,
    strategy: ModulationStrategy,
    evaluator: &'a dyn PerformanceEvaluator,
) -> impl Fn(&[f64]) -> f64 + Sync + 'a {
    let link = spec.link();
    move |x: &[f64]| {
        let report = ModulationParams::new(strategy, x.to_vec())
            .and_then(|p| p.to_phase_shift_tuple())
            .and_then(|t| evaluator.evaluate(&spec.circuit, link, &t));
        match report {
            Ok(r) => score(spec, &r),
            Err(e) => {
                debug!("candidate {x:?} failed: {e}");
                f64::INFINITY
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignOutcome {
    pub requested_strategy: ModulationStrategy,
    pub resolved_strategy: ModulationStrategy,
    pub best_params: ModulationParams,
    pub tuple: PhaseShiftTuple,
    /// Oracle evaluation of the final parameters.
    pub report: PerformanceReport,
    /// Oracle power minus the requested power, W.
    pub power_error: f64,
    pub objective_value: f64,
    pub convergence_trace: Vec<f64>,
    pub evaluations: usize,
    /// What the steering backend predicted at the final parameters, when it
    /// is not the oracle.
    pub steering_report: Option<PerformanceReport>,
    pub success: bool,
}

/// Root of `P(D_o) = target` along the outer shift, other entries fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RootChoice {
    /// The lowest outer shift at which the power crosses the target.
    First,
    /// The crossing nearest to the given outer shift.
    Nearest(f64),
}

const OUTER_SCAN: usize = 201;

/// Solves for the outer shift that delivers `target` watts on the oracle.
/// Returns `None` when no crossing exists on [0, 1].
pub fn solve_outer_shift(
    circuit: &CircuitParams,
    link: DcLink,
    strategy: ModulationStrategy,
    values: &[f64],
    target: f64,
    choice: RootChoice,
    rel_tol: f64,
) -> Result<Option<(f64, PerformanceReport)>> {
    let idx = strategy.outer_index();
    let eval = |d: f64| -> Result<PerformanceReport> {
        let mut v = values.to_vec();
        v[idx] = d;
        let t = ModulationParams::new(strategy, v)?.to_phase_shift_tuple()?;
        Oracle.evaluate(circuit, link, &t)
    };
    let mut grid = Vec::with_capacity(OUTER_SCAN);
    for j in 0..OUTER_SCAN {
        let d = j as f64 / (OUTER_SCAN - 1) as f64;
        grid.push((d, eval(d)?.average_power - target));
    }
    let brackets: Vec<(f64, f64, f64, f64)> = grid
        .windows(2)
        .filter(|w| w[0].1 <= 0.0 && w[1].1 > 0.0 || w[0].1 >= 0.0 && w[1].1 < 0.0)
        .map(|w| (w[0].0, w[0].1, w[1].0, w[1].1))
        .collect();
    let bracket = match choice {
        RootChoice::First => brackets.iter().find(|b| b.1 <= 0.0).or(brackets.first()),
        RootChoice::Nearest(d0) => brackets.iter().min_by(|a, b| {
            let da = (0.5 * (a.0 + a.2) - d0).abs();
            let db = (0.5 * (b.0 + b.2) - d0).abs();
            da.total_cmp(&db)
        }),
    };
    let Some(&(mut lo, mut glo, mut hi, _)) = bracket else {
        return Ok(None);
    };
    let tol = rel_tol * target.abs();
    let mut best = if glo.abs() <= tol { Some(lo) } else { None };
    for _ in 0..80 {
        if best.is_some() {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let g = eval(mid)?.average_power - target;
        if g.abs() <= tol || hi - lo < 1e-15 {
            best = Some(mid);
        } else if (g > 0.0) == (glo > 0.0) {
            lo = mid;
            glo = g;
        } else {
            hi = mid;
        }
    }
    let d = best.unwrap_or(0.5 * (lo + hi));
    Ok(Some((d, eval(d)?)))
}

/// Runs the design loop. `steering` scores candidates during the search; the
/// reported metrics always come from the oracle.
pub fn design(spec: &DesignSpec, steering: &dyn PerformanceEvaluator) -> Result<DesignOutcome> {
    spec.validate()?;
    let link = spec.link();
    let target = spec.conditions.actual_power;
    let mut best: Option<DesignOutcome> = None;
    let mut evaluations = 0;
    for strategy in spec.candidates() {
        let f = make_objective(spec, strategy, steering);
        let bounds = Bounds::unit(strategy.dof())?;
        let cfg = OptimConfig {
            threads: spec.threads,
            ..OptimConfig::from_budget(spec.population, spec.budget, spec.seed)?
        };
        let result = optimize(spec.algorithm, &f, &bounds, &cfg)?;
        evaluations += result.evaluations;
        let mut values = result.best.clone();
        let d0 = values[strategy.outer_index()];
        if let Some((d, _)) =
            solve_outer_shift(&spec.circuit, link, strategy, &values, target, RootChoice::Nearest(d0), 1e-9)?
        {
            values[strategy.outer_index()] = d;
        }
        let params = ModulationParams::new(strategy, values)?;
        let tuple = params.to_phase_shift_tuple()?;
        let report = evaluate_performance(&Oracle, &spec.circuit, link, &tuple)?;
        let steering_report = if spec.backend == BackendKind::Oracle {
            None
        } else {
            Some(evaluate_performance(steering, &spec.circuit, link, &tuple)?)
        };
        let power_error = report.average_power - target;
        let objective_value = score(spec, &report);
        debug!(
            "{strategy}: objective {objective_value:.6}, power error {power_error:.3} W, params {:?}",
            params.values()
        );
        let outcome = DesignOutcome {
            requested_strategy: spec.strategy,
            resolved_strategy: strategy,
            best_params: params,
            tuple,
            report,
            power_error,
            objective_value,
            convergence_trace: result.trace,
            evaluations: 0,
            steering_report,
            success: power_error.abs() <= 0.01 * target,
        };
        let better = match &best {
            None => true,
            Some(b) => (outcome.success, -outcome.objective_value) > (b.success, -b.objective_value),
        };
        if better {
            best = Some(outcome);
        }
    }
    let mut best = best.ok_or_else(|| Error::Internal("no strategy was searched".into()))?;
    best.evaluations = evaluations;
    if best.power_error.abs() > 0.05 * target {
        return Err(Error::Infeasible {
            message: format!(
                "best attempt {} {:?} misses {target} W by {:.2} W",
                best.resolved_strategy,
                best.best_params.values(),
                best.power_error
            ),
            power_error: best.power_error,
        });
    }
    info!(
        "design {} at {target} W: {} = {:.4}, power error {:.3e} W",
        best.resolved_strategy,
        spec.objective,
        spec.objective.metric(&best.report),
        best.power_error
    );
    Ok(best)
}

/// Single-phase-shift reference at the requested power: the smallest outer
/// shift that delivers it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsReference {
    pub d_o: f64,
    pub report: PerformanceReport,
}

pub fn sps_reference(spec: &DesignSpec) -> Result<Option<SpsReference>> {
    let r = solve_outer_shift(
        &spec.circuit,
        spec.link(),
        ModulationStrategy::Sps,
        &[0.0],
        spec.conditions.actual_power,
        RootChoice::First,
        1e-9,
    )?;
    Ok(r.map(|(d_o, report)| SpsReference { d_o, report }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub power: f64,
    pub outcome: std::result::Result<DesignOutcome, String>,
    pub sps: Option<SpsReference>,
}

/// Designs at each power; failures are recorded per point.
pub fn sweep_power(spec: &DesignSpec, powers: &[f64], steering: &dyn PerformanceEvaluator) -> Vec<SweepPoint> {
    powers
        .iter()
        .map(|&p| {
            let s = spec.with_power(p);
            let outcome = design(&s, steering).map_err(|e| e.to_string());
            let sps = if p <= spec.conditions.rated_power {
                sps_reference(&s).ok().flatten()
            } else {
                None
            };
            SweepPoint { power: p, outcome, sps }
        })
        .collect()
}

/// One cell of the inner-shift map at the design power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressCell {
    pub d1: f64,
    pub d2: f64,
    pub d_o: Option<f64>,
    /// Empty when no outer shift reaches the design power.
    pub stress: Option<f64>,
}

/// Current stress over a `points x points` grid of (D1, D2) with the outer
/// shift solved per cell to deliver `P_a` (bisection to 0.5 %). Rows are
/// ordered with D1 outermost.
pub fn stress_grid(spec: &DesignSpec, points: usize) -> Result<Vec<StressCell>> {
    if points < 2 {
        return Err(Error::InvalidParams("stress grid needs at least 2 points per axis".into()));
    }
    let cells: Vec<(f64, f64)> = (0..points * points)
        .map(|k| {
            let step = 1.0 / (points - 1) as f64;
            ((k / points) as f64 * step, (k % points) as f64 * step)
        })
        .collect();
    let solve = |&(d1, d2): &(f64, f64)| -> Result<StressCell> {
        let r = solve_outer_shift(
            &spec.circuit,
            spec.link(),
            ModulationStrategy::Tps,
            &[d1, 0.0, d2],
            spec.conditions.actual_power,
            RootChoice::First,
            5e-3,
        )?;
        Ok(StressCell {
            d1,
            d2,
            d_o: r.as_ref().map(|x| x.0),
            stress: r.map(|x| x.1.current_stress),
        })
    };
    if spec.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.threads)
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(solve).collect())
    } else {
        cells.iter().map(solve).collect()
    }
}
