//! Report bundle: `summary.json` plus three plot-ready CSV tables.

use std::fs;
use std::path::Path;

use modkit_core::design::{
    design, sps_reference, stress_grid, sweep_power, DesignOutcome, DesignSpec, SpsReference, SweepPoint,
};
use modkit_core::metrics::PerformanceEvaluator;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, Context, ErrorKind};
use crate::spec::{ParsedSpec, ReportOptions};

pub const SUMMARY_FILE: &str = "summary.json";
pub const GRID_FILE: &str = "stress_grid.csv";
pub const POWER_FILE: &str = "stress_vs_power.csv";
pub const PARAMS_FILE: &str = "params_vs_power.csv";
pub const SUMMARY_VERSION: u32 = 1;

pub const GRID_HEADER: [&str; 3] = ["d1", "d2", "stress"];
pub const POWER_HEADER: [&str; 3] = ["power_w", "stress_opt", "stress_sps"];
pub const PARAMS_HEADER: [&str; 4] = ["power_w", "d1", "do", "d2"];

/// Empty `stress` marks a cell where no outer shift reaches the power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub d1: f64,
    pub d2: f64,
    pub stress: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub power_w: f64,
    pub stress_opt: Option<f64>,
    pub stress_sps: Option<f64>,
}

/// Leg-level shifts of the optimum: `d1 = <S1,S3>`, `do = <S1,S5>`,
/// `d2 = <S5,S7>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsRow {
    pub power_w: f64,
    pub d1: Option<f64>,
    #[serde(rename = "do")]
    pub d_o: Option<f64>,
    pub d2: Option<f64>,
}

/// One sweep point as stored in the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub power_w: f64,
    pub outcome: Option<DesignOutcome>,
    pub error: Option<String>,
    pub sps: Option<SpsReference>,
}

impl From<SweepPoint> for SweepRow {
    fn from(p: SweepPoint) -> Self {
        let (outcome, error) = match p.outcome {
            Ok(o) => (Some(o), None),
            Err(e) => (None, Some(e)),
        };
        Self {
            power_w: p.power,
            outcome,
            error,
            sps: p.sps,
        }
    }
}

/// Run cost in deterministic units. Wall-clock time would make reruns
/// differ byte for byte.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timings {
    pub design_evaluations: usize,
    pub sweep_evaluations: usize,
    pub grid_cells: usize,
    pub feasible_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub version: u32,
    pub spec: DesignSpec,
    pub report: ReportOptions,
    /// Absent for `sweep` runs.
    pub design: Option<DesignOutcome>,
    pub sps_reference: Option<SpsReference>,
    pub sweep: Vec<SweepRow>,
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub summary: Summary,
    pub grid: Vec<GridRow>,
    pub power: Vec<PowerRow>,
    pub params: Vec<ParamsRow>,
}

impl Summary {
    pub fn power_rows(&self) -> Vec<PowerRow> {
        self.sweep
            .iter()
            .map(|r| PowerRow {
                power_w: r.power_w,
                stress_opt: r.outcome.as_ref().map(|o| o.report.current_stress),
                stress_sps: r.sps.as_ref().map(|s| s.report.current_stress),
            })
            .collect()
    }

    pub fn params_rows(&self) -> Vec<ParamsRow> {
        self.sweep
            .iter()
            .map(|r| {
                let t = r.outcome.as_ref().map(|o| o.tuple);
                ParamsRow {
                    power_w: r.power_w,
                    d1: t.map(|t| t.d13),
                    d_o: t.map(|t| t.d15),
                    d2: t.map(|t| t.d57),
                }
            })
            .collect()
    }
}

fn grid_rows(spec: &DesignSpec, points: usize) -> CliResult<Vec<GridRow>> {
    Ok(stress_grid(spec, points)?
        .into_iter()
        .map(|c| GridRow {
            d1: c.d1,
            d2: c.d2,
            stress: c.stress,
        })
        .collect())
}

/// Builds the tables for a summary; the grid is recomputed from its spec.
pub fn bundle_from_summary(mut summary: Summary, threads: usize) -> CliResult<ReportBundle> {
    if summary.version != SUMMARY_VERSION {
        return Err(CliError::new(
            ErrorKind::Spec,
            format!("summary version {} is not supported (expected {SUMMARY_VERSION})", summary.version),
        ));
    }
    let mut spec = summary.spec.clone();
    spec.threads = threads;
    let grid = grid_rows(&spec, summary.report.grid_points)?;
    summary.timings.grid_cells = grid.len();
    summary.timings.feasible_cells = grid.iter().filter(|r| r.stress.is_some()).count();
    let power = summary.power_rows();
    let params = summary.params_rows();
    Ok(ReportBundle {
        summary,
        grid,
        power,
        params,
    })
}

/// Runs the optional headline design, the power sweep and the stress grid.
/// `spec.design.threads` sets the concurrency; it is not recorded.
pub fn run_report(
    parsed: &ParsedSpec,
    steering: &dyn PerformanceEvaluator,
    headline: bool,
) -> CliResult<ReportBundle> {
    let spec = &parsed.design;
    let outcome = if headline {
        Some(design(spec, steering)?)
    } else {
        None
    };
    let sps = sps_reference(spec)?;
    let sweep: Vec<SweepRow> = sweep_power(spec, &parsed.report.sweep_powers, steering)
        .into_iter()
        .map(SweepRow::from)
        .collect();
    let mut recorded = spec.clone();
    recorded.threads = 0;
    let summary = Summary {
        version: SUMMARY_VERSION,
        spec: recorded,
        report: parsed.report.clone(),
        timings: Timings {
            design_evaluations: outcome.as_ref().map_or(0, |o| o.evaluations),
            sweep_evaluations: sweep.iter().filter_map(|r| r.outcome.as_ref()).map(|o| o.evaluations).sum(),
            ..Timings::default()
        },
        design: outcome,
        sps_reference: sps,
        sweep,
    };
    bundle_from_summary(summary, spec.threads)
}

pub fn write_table<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table<T: DeserializeOwned>(path: &Path, header: &[&str]) -> CliResult<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(CliError::new(
            ErrorKind::Io,
            format!("{}: header {:?}, expected {:?}", path.display(), found, header),
        ));
    }
    r.deserialize().map(|row| row.map_err(CliError::from)).collect()
}

pub fn write_summary(path: &Path, summary: &Summary) -> CliResult<()> {
    let text = serde_json::to_string_pretty(summary).kind(ErrorKind::Io)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_summary(path: &Path) -> CliResult<Summary> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(ErrorKind::Io, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::new(ErrorKind::Spec, format!("{}: {e}", path.display())))
}

impl ReportBundle {
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        write_summary(&dir.join(SUMMARY_FILE), &self.summary)?;
        write_table(&dir.join(GRID_FILE), &self.grid, &GRID_HEADER)?;
        write_table(&dir.join(POWER_FILE), &self.power, &POWER_HEADER)?;
        write_table(&dir.join(PARAMS_FILE), &self.params, &PARAMS_HEADER)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> CliResult<Self> {
        let b = Self {
            summary: read_summary(&dir.join(SUMMARY_FILE))?,
            grid: read_table(&dir.join(GRID_FILE), &GRID_HEADER)?,
            power: read_table(&dir.join(POWER_FILE), &POWER_HEADER)?,
            params: read_table(&dir.join(PARAMS_FILE), &PARAMS_HEADER)?,
        };
        b.check_row_counts()?;
        Ok(b)
    }

    /// Every table has as many rows as its declared grid.
    pub fn check_row_counts(&self) -> CliResult<()> {
        let n = self.summary.report.grid_points;
        let p = self.summary.report.sweep_powers.len();
        let checks = [
            (GRID_FILE, self.grid.len(), n * n),
            (POWER_FILE, self.power.len(), p),
            (PARAMS_FILE, self.params.len(), p),
            ("summary sweep", self.summary.sweep.len(), p),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(CliError::new(
                    ErrorKind::Io,
                    format!("{name}: {got} rows, expected {want}"),
                ));
            }
        }
        Ok(())
    }
}
