//! Design-spec documents (JSON).
//!
//! Required: `strategy`, `objective`, `conditions` (all five fields),
//! `algorithm`. Optional, with defaults:
//!
//! | key              | default                              |
//! |------------------|--------------------------------------|
//! | `backend`        | `oracle`                             |
//! | `circuit`        | built-in converter, any field may be overridden |
//! | `seed`           | 0                                    |
//! | `budget`         | 3000 evaluations per searched strategy |
//! | `population`     | 30                                   |
//! | `penalty_factor` | 1000                                 |
//! | `report`         | 41 grid points, sweep at 10 %..100 % of `rated_power` |
//!
//! Unknown keys are rejected anywhere in the document.

use std::fs;
use std::path::Path;

use modkit_core::converter::ModulationStrategy;
use modkit_core::design::{BackendKind, DesignSpec, Objective};
use modkit_core::optim::Algorithm;
use modkit_core::sim::{CircuitParams, OperatingConditions};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, Context, ErrorKind};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitOverrides {
    pub inductance: Option<f64>,
    pub resistance: Option<f64>,
    pub turns_ratio: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub switching_frequency: Option<f64>,
    pub r_on: Option<f64>,
}

impl CircuitOverrides {
    pub fn apply(&self, mut c: CircuitParams) -> CircuitParams {
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut c.inductance, self.inductance);
        set(&mut c.resistance, self.resistance);
        set(&mut c.turns_ratio, self.turns_ratio);
        set(&mut c.c1, self.c1);
        set(&mut c.c2, self.c2);
        set(&mut c.switching_frequency, self.switching_frequency);
        set(&mut c.r_on, self.r_on);
        c
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    pub grid_points: Option<usize>,
    pub sweep_powers: Option<Vec<f64>>,
}

/// The document as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub strategy: String,
    pub objective: String,
    pub conditions: OperatingConditions,
    pub algorithm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<CircuitOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportSection>,
}

/// Report layout settings after defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub grid_points: usize,
    pub sweep_powers: Vec<f64>,
}

impl ReportOptions {
    pub const DEFAULT_GRID_POINTS: usize = 41;

    pub fn default_for(rated_power: f64) -> Self {
        Self {
            grid_points: Self::DEFAULT_GRID_POINTS,
            sweep_powers: (1..=10).map(|k| rated_power * k as f64 / 10.0).collect(),
        }
    }
}

/// A validated request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedSpec {
    pub design: DesignSpec,
    pub report: ReportOptions,
}

fn field<T: std::str::FromStr>(name: &str, value: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::new(ErrorKind::Validation, format!("{name}: {e}")))
}

impl SpecFile {
    /// Applies defaults and validates. The wizard and the file parser both
    /// end here.
    pub fn build(&self) -> CliResult<ParsedSpec> {
        let strategy: ModulationStrategy = field("strategy", &self.strategy)?;
        let objective: Objective = field("objective", &self.objective)?;
        let algorithm: Algorithm = field("algorithm", &self.algorithm)?;
        let mut d = DesignSpec::new(strategy, objective, self.conditions, algorithm);
        if let Some(b) = &self.backend {
            d.backend = field::<BackendKind>("backend", b)?;
        }
        if let Some(c) = &self.circuit {
            d.circuit = c.apply(d.circuit);
        }
        if let Some(s) = self.seed {
            d.seed = s;
        }
        if let Some(b) = self.budget {
            d.budget = b;
        }
        if let Some(p) = self.population {
            d.population = p;
        }
        if let Some(p) = self.penalty_factor {
            d.penalty_factor = p;
        }
        d.validate().kind(ErrorKind::Validation)?;
        let mut report = ReportOptions::default_for(d.conditions.rated_power);
        if let Some(r) = &self.report {
            if let Some(g) = r.grid_points {
                report.grid_points = g;
            }
            if let Some(p) = &r.sweep_powers {
                report.sweep_powers = p.clone();
            }
        }
        if report.grid_points < 2 {
            return Err(CliError::new(
                ErrorKind::Validation,
                format!("report.grid_points: need at least 2, got {}", report.grid_points),
            ));
        }
        if let Some(p) = report.sweep_powers.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(CliError::new(
                ErrorKind::Validation,
                format!("report.sweep_powers: every power must be positive, got {p}"),
            ));
        }
        Ok(ParsedSpec { design: d, report })
    }
}

/// Parses a document; syntax errors carry serde's line and column.
pub fn parse_spec_str(text: &str) -> CliResult<ParsedSpec> {
    let file: SpecFile = serde_json::from_str(text).kind(ErrorKind::Spec)?;
    file.build()
}

pub fn parse_design_spec(path: &Path) -> CliResult<ParsedSpec> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(ErrorKind::Io, format!("{}: {e}", path.display())))?;
    parse_spec_str(&text).map_err(|e| CliError::new(e.kind, format!("{}: {}", path.display(), e.message)))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const REFERENCE_CASE: &str = r#"{
  "strategy": "TPS",
  "objective": "current_stress",
  "conditions": {
    "rated_power": 1000,
    "rated_input_voltage": 200,
    "rated_output_voltage": 200,
    "actual_power": 600,
    "actual_output_voltage": 160
  },
  "algorithm": "PSO"
}"#;

    #[test]
    fn reference_case_document() {
        let p = parse_spec_str(REFERENCE_CASE).unwrap();
        assert_eq!(p.design.strategy, ModulationStrategy::Tps);
        assert_eq!(p.design.objective, Objective::CurrentStress);
        assert_eq!(p.design.algorithm, Algorithm::Pso);
        assert_eq!(p.design.conditions.actual_power, 600.0);
        assert_eq!(p.report.grid_points, 41);
        assert_eq!(p.report.sweep_powers.len(), 10);
        assert_eq!(p.report.sweep_powers[0], 100.0);
        assert_eq!(p.report.sweep_powers[9], 1000.0);
    }

    #[test]
    fn missing_objective_is_named() {
        let text = REFERENCE_CASE.replace("  \"objective\": \"current_stress\",\n", "");
        let e = parse_spec_str(&text).unwrap_err();
        assert_eq!(e.kind, ErrorKind::Spec);
        assert!(e.message.contains("objective"), "{}", e.message);
    }

    #[test]
    fn power_above_rating_is_a_validation_error() {
        let text = REFERENCE_CASE.replace("\"actual_power\": 600", "\"actual_power\": 1200");
        let e = parse_spec_str(&text).unwrap_err();
        assert_eq!(e.kind, ErrorKind::Validation);
        assert!(e.message.contains("P_a <= P_r"), "{}", e.message);
    }

    #[test]
    fn unknown_keys_and_syntax_errors() {
        let text = REFERENCE_CASE.replace("\"algorithm\": \"PSO\"", "\"algorithm\": \"PSO\", \"colour\": 1");
        let e = parse_spec_str(&text).unwrap_err();
        assert!(e.message.contains("colour"), "{}", e.message);
        let text = REFERENCE_CASE.replace("\"rated_power\": 1000,", "\"rated_power\": 1000");
        let e = parse_spec_str(&text).unwrap_err();
        assert_eq!(e.kind, ErrorKind::Spec);
        assert!(e.message.contains("line 6"), "{}", e.message);
        let text = REFERENCE_CASE.replace("\"TPS\"", "\"QPS\"");
        assert!(parse_spec_str(&text).unwrap_err().message.starts_with("strategy"));
    }

    #[test]
    fn overrides_apply() {
        let text = REFERENCE_CASE.replace(
            "\"algorithm\": \"PSO\"",
            "\"algorithm\": \"de\", \"seed\": 9, \"budget\": 600, \"circuit\": {\"inductance\": 4e-5}",
        );
        let p = parse_spec_str(&text).unwrap();
        assert_eq!(p.design.algorithm, Algorithm::De);
        assert_eq!(p.design.seed, 9);
        assert_eq!(p.design.budget, 600);
        assert_eq!(p.design.circuit.inductance, 4e-5);
        assert_eq!(p.design.circuit.resistance, CircuitParams::default().resistance);
    }
}
