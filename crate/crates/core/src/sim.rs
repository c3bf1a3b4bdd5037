//! Steady-state reference simulation of the DAB power stage.
//!
//! The inductor obeys `L di/dt = -R_L i + v_p - n v_s`. With piecewise
//! constant bridge voltages every interval has an exact exponential solution,
//! so one period is an affine map `i(T) = a i(0) + c` whose fixed point is the
//! periodic steady state. The full model adds the DC-link capacitors
//!
//! ```text
//! C1 dv_C1/dt = i_1 - s_pri i_L,   i_1 = (V_src - v_C1) / R_src
//! C2 dv_C2/dt = n s_sec i_L - i_2, i_2 = v_C2 / R_load
//! ```
//!
//! and is integrated with fixed-step RK4 on the sampling grid.

use serde::{Deserialize, Serialize};

use crate::converter::{switching_functions, Grid, PhaseShiftTuple, SampledTrace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParams {
    /// Leakage (series) inductance, H.
    pub inductance: f64,
    /// Equivalent series resistance of the inductor, ohm.
    pub resistance: f64,
    pub turns_ratio: f64,
    pub c1: f64,
    pub c2: f64,
    pub switching_frequency: f64,
    /// Per-device on-resistance, ohm.
    pub r_on: f64,
}

impl Default for CircuitParams {
    fn default() -> Self {
        Self {
            inductance: 32e-6,
            resistance: 0.1,
            turns_ratio: 1.0,
            c1: 470e-6,
            c2: 470e-6,
            switching_frequency: 100e3,
            r_on: 0.05,
        }
    }
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("inductance", self.inductance),
            ("c1", self.c1),
            ("c2", self.c2),
            ("switching_frequency", self.switching_frequency),
            ("turns_ratio", self.turns_ratio),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::out_of_range(name, v, "(0, inf)"));
            }
        }
        for (name, v) in [("resistance", self.resistance), ("r_on", self.r_on)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::out_of_range(name, v, "[0, inf)"));
            }
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.switching_frequency
    }

    pub fn grid(&self, samples_per_period: usize) -> Result<Grid> {
        Grid::from_frequency(samples_per_period, self.switching_frequency)
    }

    /// Lossless single-phase-shift power `n V1 V2 D (1 - D) / (2 f L)`.
    pub fn sps_power(&self, v1: f64, v2: f64, d: f64) -> f64 {
        self.turns_ratio * v1 * v2 * d * (1.0 - d)
            / (2.0 * self.switching_frequency * self.inductance)
    }
}

/// A design scenario: rated and actual operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingConditions {
    pub rated_power: f64,
    pub actual_power: f64,
    pub rated_input_voltage: f64,
    pub rated_output_voltage: f64,
    pub actual_output_voltage: f64,
}

impl OperatingConditions {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rated_power", self.rated_power),
            ("actual_power", self.actual_power),
            ("rated_input_voltage", self.rated_input_voltage),
            ("rated_output_voltage", self.rated_output_voltage),
            ("actual_output_voltage", self.actual_output_voltage),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::out_of_range(name, v, "(0, inf)"));
            }
        }
        if self.actual_power > self.rated_power {
            return Err(Error::out_of_range(
                "actual_power",
                self.actual_power,
                "P_a <= P_r (rated_power)",
            ));
        }
        if self.actual_output_voltage > 1.5 * self.rated_output_voltage {
            return Err(Error::out_of_range(
                "actual_output_voltage",
                self.actual_output_voltage,
                "V_2a <= 1.5 V_2r",
            ));
        }
        Ok(())
    }
}

/// Source and load that close the DC-link equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadModel {
    pub source_voltage: f64,
    /// Zero pins v_C1 to the source voltage.
    pub source_resistance: f64,
    pub load_resistance: f64,
}

impl Default for LoadModel {
    fn default() -> Self {
        Self {
            source_voltage: 200.0,
            source_resistance: 0.05,
            load_resistance: 40.0,
        }
    }
}

impl LoadModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.source_voltage > 0.0) {
            return Err(Error::out_of_range("source_voltage", self.source_voltage, "(0, inf)"));
        }
        if !(self.source_resistance >= 0.0) {
            return Err(Error::out_of_range(
                "source_resistance",
                self.source_resistance,
                "[0, inf)",
            ));
        }
        if !(self.load_resistance > 0.0) {
            return Err(Error::out_of_range("load_resistance", self.load_resistance, "(0, inf)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTrace {
    pub i_l: SampledTrace,
    pub v_c1: SampledTrace,
    pub v_c2: SampledTrace,
    pub v_p: SampledTrace,
    pub v_s: SampledTrace,
}

impl StateTrace {
    pub fn grid(&self) -> Grid {
        self.i_l.grid()
    }
}

// ---------------------------------------------------------------------------
// exact RL segments

/// `(1 - e^-a) / a`
fn phi1(a: f64) -> f64 {
    if a < 1e-8 {
        1.0 - a / 2.0
    } else {
        -(-a).exp_m1() / a
    }
}

/// `(a - 1 + e^-a) / a^2`
fn phi2(a: f64) -> f64 {
    if a < 1e-2 {
        0.5 - a / 6.0 + a * a / 24.0 - a * a * a / 120.0 + a * a * a * a / 720.0
    } else {
        (a + (-a).exp_m1()) / (a * a)
    }
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Series R-L branch driven by a constant voltage over each segment.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RlBranch {
    pub l: f64,
    pub r: f64,
}

impl RlBranch {
    pub fn new(circuit: &CircuitParams) -> Self {
        Self {
            l: circuit.inductance,
            r: circuit.resistance,
        }
    }

    pub fn step(&self, i0: f64, v: f64, h: f64) -> f64 {
        let a = self.r * h / self.l;
        i0 * (-a).exp() + v * h / self.l * phi1(a)
    }

    pub fn integral(&self, i0: f64, v: f64, h: f64) -> f64 {
        let a = self.r * h / self.l;
        i0 * h * phi1(a) + v * h * h / self.l * phi2(a)
    }

    pub fn integral_sq(&self, i0: f64, v: f64, h: f64) -> f64 {
        GAUSS5
            .iter()
            .map(|&(x, w)| {
                let i = self.step(i0, v, 0.5 * h * (1.0 + x));
                w * i * i
            })
            .sum::<f64>()
            * 0.5
            * h
    }

    /// Currents at the start of every segment of the periodic steady state.
    pub fn periodic_currents(&self, durations: &[f64], volts: &[f64]) -> Result<Vec<f64>> {
        let period: f64 = durations.iter().sum();
        let mut i = 0.0;
        for (&h, &v) in durations.iter().zip(volts) {
            i = self.step(i, v, h);
        }
        let i0 = if self.r > 0.0 {
            let gap = -(-self.r * period / self.l).exp_m1();
            if gap.abs() < 1e-14 {
                return Err(Error::Internal(format!(
                    "degenerate periodic fixed point (1 - a = {gap:e})"
                )));
            }
            i / gap
        } else {
            let drive: f64 = durations.iter().zip(volts).map(|(h, v)| h * v).sum();
            let scale: f64 = durations.iter().zip(volts).map(|(h, v)| (h * v).abs()).sum();
            if drive.abs() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Domain(format!(
                    "lossless inductor with non-zero mean voltage ({:.3e} V) has no periodic solution",
                    drive / period
                )));
            }
            // R_L -> 0 limit of the fixed point: the zero-mean solution
            let mut acc = 0.0;
            let mut j = 0.0;
            for (&h, &v) in durations.iter().zip(volts) {
                acc += self.integral(j, v, h);
                j = self.step(j, v, h);
            }
            -acc / period
        };
        let mut out = Vec::with_capacity(durations.len());
        let mut i = i0;
        for (&h, &v) in durations.iter().zip(volts) {
            out.push(i);
            i = self.step(i, v, h);
        }
        Ok(out)
    }
}

/// Periodic inductor current for sampled bridge voltages held constant over
/// each sample interval.
pub fn steady_state_current(
    circuit: &CircuitParams,
    v_p: &SampledTrace,
    v_s: &SampledTrace,
) -> Result<SampledTrace> {
    circuit.validate()?;
    v_p.ensure_same_grid(v_s, "steady_state_current")?;
    let grid = v_p.grid();
    let n = circuit.turns_ratio;
    let volts: Vec<f64> = v_p
        .values()
        .iter()
        .zip(v_s.values())
        .map(|(p, s)| p - n * s)
        .collect();
    let durations = vec![grid.dt(); grid.len()];
    let currents = RlBranch::new(circuit).periodic_currents(&durations, &volts)?;
    SampledTrace::new(grid, currents)
}

/// Steady state with stiff DC links, solved on the exact switching instants
/// rather than on a sampling grid.
#[derive(Debug, Clone)]
pub struct ExactSteadyState {
    period: f64,
    turns_ratio: f64,
    branch: RlBranch,
    starts: Vec<f64>,
    durations: Vec<f64>,
    v_p: Vec<f64>,
    v_s: Vec<f64>,
    legs: Vec<[bool; 4]>,
    currents: Vec<f64>,
}

impl ExactSteadyState {
    pub fn solve(circuit: &CircuitParams, tuple: &PhaseShiftTuple, v1: f64, v2: f64) -> Result<Self> {
        circuit.validate()?;
        if !(v1 > 0.0 && v2 > 0.0) {
            return Err(Error::Domain(format!(
                "DC-link voltages must be positive, got {v1} and {v2}"
            )));
        }
        let period = circuit.period();
        let mut cuts: Vec<f64> = tuple
            .commutations(period)
            .iter()
            .map(|c| c.time)
            .chain(std::iter::once(0.0))
            .filter(|&t| t < period)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * period);
        let mut starts = Vec::with_capacity(cuts.len());
        let mut durations = Vec::with_capacity(cuts.len());
        let mut vp = Vec::with_capacity(cuts.len());
        let mut vs = Vec::with_capacity(cuts.len());
        let mut legs = Vec::with_capacity(cuts.len());
        for (j, &t0) in cuts.iter().enumerate() {
            let t1 = cuts.get(j + 1).copied().unwrap_or(period);
            if t1 - t0 <= 0.0 {
                continue;
            }
            let mid = 0.5 * (t0 + t1) / (0.5 * period);
            let (sp, ss) = tuple.switching_at(mid);
            starts.push(t0);
            durations.push(t1 - t0);
            vp.push(v1 * sp);
            vs.push(v2 * ss);
            legs.push(tuple.leg_states(mid));
        }
        let branch = RlBranch::new(circuit);
        let n = circuit.turns_ratio;
        let drive: Vec<f64> = vp.iter().zip(&vs).map(|(p, s)| p - n * s).collect();
        let currents = branch.periodic_currents(&durations, &drive)?;
        Ok(Self {
            period,
            turns_ratio: n,
            branch,
            starts,
            durations,
            v_p: vp,
            v_s: vs,
            legs,
            currents,
        })
    }

    fn drive(&self, j: usize) -> f64 {
        self.v_p[j] - self.turns_ratio * self.v_s[j]
    }

    pub fn current_at(&self, time: f64) -> f64 {
        let t = time.rem_euclid(self.period);
        let j = match self.starts.partition_point(|&s| s <= t) {
            0 => 0,
            p => p - 1,
        };
        self.branch.step(self.currents[j], self.drive(j), t - self.starts[j])
    }

    pub fn sample(&self, grid: Grid) -> SampledTrace {
        let values = (0..grid.len()).map(|k| self.current_at(grid.time(k))).collect();
        SampledTrace::new(grid, values).expect("grid length")
    }

    /// Peak-to-peak current. Within a segment the current relaxes
    /// monotonically, so the extremes sit on segment boundaries.
    pub fn peak_to_peak(&self) -> f64 {
        let (lo, hi) = self
            .currents
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(i), hi.max(i)));
        hi - lo
    }

    /// Mean power delivered into the secondary bridge.
    pub fn output_power(&self) -> f64 {
        (0..self.durations.len())
            .map(|j| {
                self.turns_ratio
                    * self.v_s[j]
                    * self.branch.integral(self.currents[j], self.drive(j), self.durations[j])
            })
            .sum::<f64>()
            / self.period
    }

    /// Mean power drawn by the primary bridge.
    pub fn input_power(&self) -> f64 {
        (0..self.durations.len())
            .map(|j| {
                self.v_p[j] * self.branch.integral(self.currents[j], self.drive(j), self.durations[j])
            })
            .sum::<f64>()
            / self.period
    }

    /// Mean of `i_L^2` over the period.
    pub fn mean_square_current(&self) -> f64 {
        (0..self.durations.len())
            .map(|j| self.branch.integral_sq(self.currents[j], self.drive(j), self.durations[j]))
            .sum::<f64>()
            / self.period
    }

    pub fn inductor_loss(&self) -> f64 {
        self.branch.r * self.mean_square_current()
    }

    /// Mean squared conducted current of S1..S8. Each leg always routes the
    /// branch current through exactly one of its two devices, the upper one
    /// while its gate is high.
    pub fn device_mean_square(&self) -> [f64; 8] {
        let mut out = [0.0; 8];
        let n2 = self.turns_ratio * self.turns_ratio;
        for j in 0..self.durations.len() {
            let sq = self.branch.integral_sq(self.currents[j], self.drive(j), self.durations[j]);
            for (leg, &upper) in self.legs[j].iter().enumerate() {
                let scale = if leg < 2 { 1.0 } else { n2 };
                let dev = 2 * leg + usize::from(!upper);
                out[dev] += scale * sq;
            }
        }
        out.map(|v| v / self.period)
    }

    pub fn period(&self) -> f64 {
        self.period
    }
}

// ---------------------------------------------------------------------------
// full-state RK4

type State = [f64; 3];

#[derive(Debug, Clone)]
pub struct FullSimulation {
    pub trace: StateTrace,
    pub cycles: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSummary {
    /// (i_L, v_C1, v_C2) at the end of the cycle.
    pub end_state: [f64; 3],
    /// Energy delivered to the load resistor during the cycle, J.
    pub load_energy: f64,
}

struct FullModel<'a> {
    circuit: &'a CircuitParams,
    load: &'a LoadModel,
    s_pri: Vec<f64>,
    s_sec: Vec<f64>,
    dt: f64,
}

impl FullModel<'_> {
    fn pinned(&self) -> bool {
        self.load.source_resistance == 0.0
    }

    fn deriv(&self, x: &State, sp: f64, ss: f64) -> State {
        let c = self.circuit;
        let n = c.turns_ratio;
        let [i, v1, v2] = *x;
        let di = (-c.resistance * i + sp * v1 - n * ss * v2) / c.inductance;
        let dv1 = if self.pinned() {
            0.0
        } else {
            ((self.load.source_voltage - v1) / self.load.source_resistance - sp * i) / c.c1
        };
        let dv2 = (n * ss * i - v2 / self.load.load_resistance) / c.c2;
        [di, dv1, dv2]
    }

    fn rk4(&self, x: &State, sp: f64, ss: f64) -> State {
        let h = self.dt;
        let add = |a: &State, b: &State, s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
        let k1 = self.deriv(x, sp, ss);
        let k2 = self.deriv(&add(x, &k1, 0.5 * h), sp, ss);
        let k3 = self.deriv(&add(x, &k2, 0.5 * h), sp, ss);
        let k4 = self.deriv(&add(x, &k3, h), sp, ss);
        let mut out = *x;
        for j in 0..3 {
            out[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        out
    }

    /// One period from `x0`; returns the state at each sample and at the end.
    fn cycle(&self, x0: State) -> (Vec<State>, State) {
        let mut x = x0;
        let mut samples = Vec::with_capacity(self.s_pri.len());
        for (&sp, &ss) in self.s_pri.iter().zip(&self.s_sec) {
            samples.push(x);
            x = self.rk4(&x, sp, ss);
        }
        (samples, x)
    }

    fn free_indices(&self) -> &'static [usize] {
        if self.pinned() {
            &[0, 2]
        } else {
            &[0, 1, 2]
        }
    }

    fn embed(&self, z: &[f64]) -> State {
        let mut x = [0.0, self.load.source_voltage, 0.0];
        for (&idx, &v) in self.free_indices().iter().zip(z) {
            x[idx] = v;
        }
        x
    }

    /// The period map is affine (RK4 on a linear system); solve its fixed
    /// point directly.
    fn shooting_guess(&self) -> Option<State> {
        let free = self.free_indices();
        let m = free.len();
        let map = |z: &[f64]| -> Vec<f64> {
            let (_, end) = self.cycle(self.embed(z));
            free.iter().map(|&i| end[i]).collect()
        };
        let zero = vec![0.0; m];
        let c = map(&zero);
        let mut a = vec![vec![0.0; m + 1]; m];
        for j in 0..m {
            let mut e = zero.clone();
            e[j] = 1.0;
            let col = map(&e);
            for r in 0..m {
                let phi = col[r] - c[r];
                a[r][j] = if r == j { 1.0 - phi } else { -phi };
            }
        }
        for r in 0..m {
            a[r][m] = c[r];
        }
        solve_dense(&mut a).map(|z| self.embed(&z))
    }
}

fn solve_dense(a: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let m = a.len();
    for col in 0..m {
        let piv = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-300 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..m {
            let f = a[r][col] / a[col][col];
            for c in col..=m {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut z = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|c| a[r][c] * z[c]).sum();
        z[r] = (a[r][m] - s) / a[r][r];
    }
    z.iter().all(|v| v.is_finite()).then_some(z)
}

fn full_model<'a>(
    circuit: &'a CircuitParams,
    load: &'a LoadModel,
    tuple: &PhaseShiftTuple,
    grid: Grid,
) -> Result<FullModel<'a>> {
    circuit.validate()?;
    load.validate()?;
    let (s_pri, s_sec) = switching_functions(tuple, grid);
    Ok(FullModel {
        circuit,
        load,
        s_pri: s_pri.into_values(),
        s_sec: s_sec.into_values(),
        dt: grid.dt(),
    })
}

/// Periodic steady state of the coupled inductor / DC-link system.
///
/// The period map of the RK4 discretization is solved for its fixed point
/// first; cycling then continues from there until the cycle-to-cycle change
/// drops below `tol` (relative), or fails after `max_cycles`.
pub fn simulate_full(
    circuit: &CircuitParams,
    load: &LoadModel,
    tuple: &PhaseShiftTuple,
    grid: Grid,
    max_cycles: usize,
    tol: f64,
) -> Result<FullSimulation> {
    if max_cycles < 1 {
        return Err(Error::InvalidParams("max_cycles must be at least 1".into()));
    }
    let model = full_model(circuit, load, tuple, grid)?;
    let v_ref = load.source_voltage;
    let i_floor = 1e-9 * v_ref * grid.period / circuit.inductance;
    let v_floor = 1e-9 * v_ref;
    let mut x = model
        .shooting_guess()
        .unwrap_or([0.0, v_ref, 0.0]);
    let mut residual = f64::INFINITY;
    for cycle in 1..=max_cycles {
        let (samples, end) = model.cycle(x);
        let i_max = samples.iter().fold(0.0f64, |m, s| m.max(s[0].abs()));
        residual = [
            (end[0] - x[0]).abs() / i_max.max(i_floor),
            (end[1] - x[1]).abs() / x[1].abs().max(v_floor),
            (end[2] - x[2]).abs() / x[2].abs().max(v_floor),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        if !residual.is_finite() {
            break;
        }
        if residual < tol {
            let trace = assemble_trace(&model, &samples, grid)?;
            return Ok(FullSimulation {
                trace,
                cycles: cycle,
                residual,
            });
        }
        x = end;
    }
    Err(Error::Convergence {
        cycles: max_cycles,
        residual,
    })
}

fn assemble_trace(model: &FullModel<'_>, samples: &[State], grid: Grid) -> Result<StateTrace> {
    let col = |j: usize| SampledTrace::new(grid, samples.iter().map(|s| s[j]).collect());
    let v_c1 = col(1)?;
    let v_c2 = col(2)?;
    let v_p = SampledTrace::new(
        grid,
        v_c1.values().iter().zip(&model.s_pri).map(|(v, s)| v * s).collect(),
    )?;
    let v_s = SampledTrace::new(
        grid,
        v_c2.values().iter().zip(&model.s_sec).map(|(v, s)| v * s).collect(),
    )?;
    Ok(StateTrace {
        i_l: col(0)?,
        v_c1,
        v_c2,
        v_p,
        v_s,
    })
}

/// Plain cycle-by-cycle integration from a given initial state.
pub fn simulate_transient(
    circuit: &CircuitParams,
    load: &LoadModel,
    tuple: &PhaseShiftTuple,
    grid: Grid,
    initial: [f64; 3],
    cycles: usize,
) -> Result<Vec<CycleSummary>> {
    let model = full_model(circuit, load, tuple, grid)?;
    let mut x = initial;
    if model.pinned() {
        x[1] = load.source_voltage;
    }
    let dt = grid.dt();
    let mut out = Vec::with_capacity(cycles);
    for _ in 0..cycles {
        let (samples, end) = model.cycle(x);
        let mut energy = 0.0;
        for (k, s) in samples.iter().enumerate() {
            let next = samples.get(k + 1).unwrap_or(&end);
            energy += 0.5 * dt * (s[2] * s[2] + next[2] * next[2]) / load.load_resistance;
        }
        out.push(CycleSummary {
            end_state: end,
            load_energy: energy,
        });
        x = end;
    }
    Ok(out)
}

/// Stiff-link steady state sampled on a grid: v_C1 = v1, v_C2 = v2.
pub fn simulate_fixed_links(
    circuit: &CircuitParams,
    tuple: &PhaseShiftTuple,
    v1: f64,
    v2: f64,
    grid: Grid,
) -> Result<StateTrace> {
    let (v_p, v_s) = crate::converter::ideal_bridge_voltages(tuple, v1, v2, grid)?;
    let i_l = steady_state_current(circuit, &v_p, &v_s)?;
    Ok(StateTrace {
        i_l,
        v_c1: SampledTrace::new(grid, vec![v1; grid.len()])?,
        v_c2: SampledTrace::new(grid, vec![v2; grid.len()])?,
        v_p,
        v_s,
    })
}

/// Mean power into the secondary bridge, `<n v_s i_L>`; positive means
/// primary to secondary. The current is taken as linear within each sample
/// interval, which is exact for a lossless inductor with piecewise constant
/// voltages.
pub fn average_power(trace: &StateTrace, turns_ratio: f64) -> f64 {
    let i = trace.i_l.values();
    let vs = trace.v_s.values();
    let k_len = i.len();
    let sum: f64 = (0..k_len)
        .map(|k| vs[k] * 0.5 * (i[k] + i[(k + 1) % k_len]))
        .sum();
    turns_ratio * sum / k_len as f64
}

/// Central-difference residuals of the second-order capacitor equations
///
/// ```text
/// C1 v1'' + v1' / R_src + s_pri i_L' = 0
/// C2 v2'' + v2' / R_load - n s_sec i_L' = 0
/// ```
///
/// at every sample whose three-point stencil sees constant switching. Needs
/// `R_src > 0`; with a pinned source the first equation is empty.
pub fn second_order_residuals(
    trace: &StateTrace,
    circuit: &CircuitParams,
    load: &LoadModel,
    tuple: &PhaseShiftTuple,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(load.source_resistance > 0.0) {
        return Err(Error::Domain("second-order input residual needs R_src > 0".into()));
    }
    let grid = trace.grid();
    let (sp, ss) = switching_functions(tuple, grid);
    let (sp, ss) = (sp.values(), ss.values());
    let k_len = grid.len();
    let h = grid.dt();
    let i = trace.i_l.values();
    let v1 = trace.v_c1.values();
    let v2 = trace.v_c2.values();
    let mut r1 = Vec::new();
    let mut r2 = Vec::new();
    for k in 0..k_len {
        let (a, b) = ((k + k_len - 1) % k_len, (k + 1) % k_len);
        // switching is held over [t_k, t_{k+1}), so the stencil spans two intervals
        if sp[a] != sp[k] || ss[a] != ss[k] {
            continue;
        }
        let d1 = |x: &[f64]| (x[b] - x[a]) / (2.0 * h);
        let d2 = |x: &[f64]| (x[b] - 2.0 * x[k] + x[a]) / (h * h);
        r1.push(circuit.c1 * d2(v1) + d1(v1) / load.source_resistance + sp[k] * d1(i));
        r2.push(circuit.c2 * d2(v2) + d1(v2) / load.load_resistance - circuit.turns_ratio * ss[k] * d1(i));
    }
    Ok((r1, r2))
}

/// Per-cycle energy flows of a converged full-state trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    pub source: f64,
    pub load: f64,
    pub inductor: f64,
}

pub fn energy_balance(trace: &StateTrace, circuit: &CircuitParams, load: &LoadModel) -> EnergyBalance {
    let dt = trace.grid().dt();
    let i = trace.i_l.values();
    let v1 = trace.v_c1.values();
    let v2 = trace.v_c2.values();
    let source = if load.source_resistance > 0.0 {
        v1.iter()
            .map(|v| v * (load.source_voltage - v) / load.source_resistance)
            .sum::<f64>()
    } else {
        // pinned source: everything entering C1 goes into the bridge
        let s = trace.v_p.values();
        let k_len = i.len();
        (0..k_len).map(|k| s[k] * 0.5 * (i[k] + i[(k + 1) % k_len])).sum::<f64>()
    };
    EnergyBalance {
        source: source * dt,
        load: v2.iter().map(|v| v * v / load.load_resistance).sum::<f64>() * dt,
        inductor: i.iter().map(|x| circuit.resistance * x * x).sum::<f64>() * dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::converter::ideal_bridge_voltages;

    fn lossless() -> CircuitParams {
        CircuitParams {
            inductance: 40e-6,
            resistance: 0.0,
            ..CircuitParams::default()
        }
    }

    /// Piecewise integration of L di/dt = v for a two-level SPS pattern,
    /// written out by hand: over [0, D T/2) the drive is V1 + n V2, over
    /// [D T/2, T/2) it is V1 - n V2, and the second half mirrors the first.
    fn sps_power_by_hand(c: &CircuitParams, v1: f64, v2: f64, d: f64) -> f64 {
        let n = c.turns_ratio;
        let half = 0.5 / c.switching_frequency;
        let t1 = d * half;
        let t2 = half - t1;
        let slope1 = (v1 + n * v2) / c.inductance;
        let slope2 = (v1 - n * v2) / c.inductance;
        // half-wave antisymmetry: i(T/2) = -i(0)
        let i0 = -(slope1 * t1 + slope2 * t2) / 2.0;
        let i1 = i0 + slope1 * t1;
        let i2 = i1 + slope2 * t2;
        // secondary voltage is -V2 on the first interval and +V2 on the second
        let e = -n * v2 * 0.5 * (i0 + i1) * t1 + n * v2 * 0.5 * (i1 + i2) * t2;
        e / half
    }

    #[test]
    fn hand_integration_matches_closed_form() {
        let c = lossless();
        for d in [0.05, 0.2, 0.37, 0.5] {
            let by_hand = sps_power_by_hand(&c, 200.0, 160.0, d);
            let closed = c.sps_power(200.0, 160.0, d);
            assert!((by_hand - closed).abs() <= 1e-9 * closed, "{by_hand} vs {closed}");
        }
    }

    #[test]
    fn matched_zero_shift_has_no_current() {
        let c = CircuitParams::default();
        let g = c.grid(200).unwrap();
        let t = PhaseShiftTuple::new(0.0, 0.0, 0.0).unwrap();
        let (vp, vs) = ideal_bridge_voltages(&t, 200.0, 200.0, g).unwrap();
        let i = steady_state_current(&c, &vp, &vs).unwrap();
        assert!(i.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sampled_sps_power_matches_closed_form() {
        let c = CircuitParams {
            resistance: 0.0,
            inductance: 40e-6,
            ..CircuitParams::default()
        };
        let g = c.grid(200).unwrap();
        let t = PhaseShiftTuple::new(0.0, 0.2, 0.0).unwrap();
        let trace = simulate_fixed_links(&c, &t, 200.0, 160.0, g).unwrap();
        let p = average_power(&trace, 1.0);
        let expected = c.sps_power(200.0, 160.0, 0.2);
        assert!((p - expected).abs() <= 1e-3 * expected, "{p} vs {expected}");
    }

    #[test]
    fn exact_matches_sampled_on_aligned_edges() {
        let c = CircuitParams::default();
        let g = c.grid(200).unwrap();
        let t = PhaseShiftTuple::new(0.1, 0.25, 0.3).unwrap();
        let exact = ExactSteadyState::solve(&c, &t, 200.0, 160.0).unwrap();
        let sampled = simulate_fixed_links(&c, &t, 200.0, 160.0, g).unwrap();
        let from_exact = exact.sample(g);
        for (a, b) in from_exact.values().iter().zip(sampled.i_l.values()) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
        let ptp = sampled.i_l.max() - sampled.i_l.min();
        assert!((exact.peak_to_peak() - ptp).abs() <= 1e-9 * ptp);
        let p_sampled = average_power(&sampled, c.turns_ratio);
        assert!((exact.output_power() - p_sampled).abs() <= 1e-3 * p_sampled.abs());
        // power balance of the branch
        let loss = exact.inductor_loss();
        assert!((exact.input_power() - exact.output_power() - loss).abs() <= 1e-9 * exact.input_power());
    }

    #[test]
    fn lossless_nonzero_mean_drive_is_rejected() {
        let c = lossless();
        let g = c.grid(16).unwrap();
        let vp = SampledTrace::new(g, vec![1.0; 16]).unwrap();
        let vs = SampledTrace::zeros(g);
        assert!(matches!(steady_state_current(&c, &vp, &vs), Err(Error::Domain(_))));
    }

    #[test]
    fn negative_resistance_is_a_domain_error() {
        let c = CircuitParams {
            resistance: -0.1,
            ..CircuitParams::default()
        };
        let g = c.grid(16).unwrap();
        let z = SampledTrace::zeros(g);
        assert!(matches!(steady_state_current(&c, &z, &z), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn conditions_validation() {
        let mut oc = OperatingConditions {
            rated_power: 1000.0,
            actual_power: 600.0,
            rated_input_voltage: 200.0,
            rated_output_voltage: 200.0,
            actual_output_voltage: 160.0,
        };
        assert!(oc.validate().is_ok());
        oc.actual_power = 1200.0;
        let err = oc.validate().unwrap_err().to_string();
        assert!(err.contains("actual_power") && err.contains("P_a <= P_r"), "{err}");
        oc.actual_power = 600.0;
        oc.actual_output_voltage = 301.0;
        assert!(oc.validate().is_err());
    }

    #[test]
    fn zero_shift_lets_the_load_decay() {
        let c = CircuitParams::default();
        let load = LoadModel {
            source_resistance: 0.0,
            load_resistance: 10.0,
            ..LoadModel::default()
        };
        let g = c.grid(200).unwrap();
        let t = PhaseShiftTuple::new(0.0, 0.0, 0.0).unwrap();
        let cycles = simulate_transient(&c, &load, &t, g, [0.0, 200.0, 200.0], 400).unwrap();
        let v2: Vec<f64> = cycles.iter().map(|s| s.end_state[2]).collect();
        for w in v2.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(v2[v2.len() - 1] < 0.5 * v2[0]);
        let first = cycles[0].load_energy;
        let last = cycles[cycles.len() - 1].load_energy;
        assert!(last < 0.25 * first);

        let ss = simulate_full(&c, &load, &t, g, 10, 1e-8).unwrap();
        // only the R_L phase lag sustains a small residual transfer
        assert!(ss.trace.v_c2.max().abs() < 0.01 * 200.0);
        assert!(average_power(&ss.trace, 1.0).abs() < 1e-4 * c.sps_power(200.0, 200.0, 0.5));
    }
}
