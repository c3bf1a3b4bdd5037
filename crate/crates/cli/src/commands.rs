//! Subcommand grammar and dispatch.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;
use modkit_core::converter::{ModulationParams, ModulationStrategy, RingingConfig};
use modkit_core::dataset::{generate_dataset, Dataset, DatasetConfig, ParamBox};
use modkit_core::design::BackendKind;
use modkit_core::metrics::{Oracle, PerformanceEvaluator};
use modkit_core::sim::{simulate_full, LoadModel};
use modkit_surrogate::eval::MaeTable;
use modkit_surrogate::{train, Checkpoint, SurrogateEvaluator, SurrogatePair, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, Context, ErrorKind};
use crate::output::write_atomically;
use crate::report::{bundle_from_summary, read_summary, run_report, write_table};
use crate::spec::{parse_design_spec, CircuitOverrides, ParsedSpec};
use crate::wizard::wizard;

pub const THREADS_ENV: &str = "MODKIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "modkit", version, about = "Modulation design toolkit for dual active bridge converters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one operating point to periodic steady state.
    Simulate(Args),
    /// Generate a simulator dataset.
    GenData(Args),
    /// Train the surrogate pair on a dataset.
    Train(Args),
    /// Tabulate free-running MAE of a checkpoint per split.
    Eval(Args),
    /// Optimize at the requested power and emit a report bundle.
    Design(Args),
    /// Optimize across the sweep powers and emit a report bundle.
    Sweep(Args),
    /// Rebuild the tables of a bundle from its summary.json.
    Report(Args),
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Args {
    /// Input document (design spec, simulation, dataset or training config).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output directory; created atomically, must not exist or be empty.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',')]
    pub splits: Option<Vec<f64>>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub backend: Option<String>,
    /// Objective evaluations per searched strategy.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Dataset directory (train, eval).
    #[arg(long)]
    pub data: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::GenData(_) => "gen-data",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Design(_) => "design",
            Command::Sweep(_) => "sweep",
            Command::Report(_) => "report",
        }
    }

    fn allowed(&self) -> &'static [&'static str] {
        match self {
            Command::Simulate(_) => &["spec", "out"],
            Command::GenData(_) => &["spec", "out", "seed", "count", "splits"],
            Command::Train(_) => &["spec", "out", "seed", "data", "checkpoint"],
            Command::Eval(_) => &["out", "data", "checkpoint"],
            Command::Design(_) | Command::Sweep(_) => &["spec", "out", "seed", "checkpoint", "backend", "budget"],
            Command::Report(_) => &["spec", "out", "checkpoint"],
        }
    }

    fn args(&self) -> &Args {
        match self {
            Command::Simulate(a)
            | Command::GenData(a)
            | Command::Train(a)
            | Command::Eval(a)
            | Command::Design(a)
            | Command::Sweep(a)
            | Command::Report(a) => a,
        }
    }
}

impl Args {
    fn given(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let mut add = |name, set: bool| {
            if set {
                v.push(name)
            }
        };
        add("spec", self.spec.is_some());
        add("out", self.out.is_some());
        add("seed", self.seed.is_some());
        add("count", self.count.is_some());
        add("splits", self.splits.is_some());
        add("checkpoint", self.checkpoint.is_some());
        add("backend", self.backend.is_some());
        add("budget", self.budget.is_some());
        add("data", self.data.is_some());
        v
    }

    fn require<'a, T>(value: &'a Option<T>, flag: &str, cmd: &str) -> CliResult<&'a T> {
        value
            .as_ref()
            .ok_or_else(|| CliError::new(ErrorKind::Usage, format!("{cmd} needs --{flag}")))
    }
}

/// Concurrency cap from the environment; unset means one worker per core,
/// 0 the serial path.
pub fn threads_from_env() -> CliResult<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::new(ErrorKind::Usage, format!("{THREADS_ENV} must be a non-negative integer, got '{v}'"))),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::new(ErrorKind::Io, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::new(ErrorKind::Spec, format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).kind(ErrorKind::Io)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn read_dataset(dir: &Path) -> CliResult<Dataset> {
    Dataset::read(dir).map_err(|e| CliError::new(ErrorKind::Dataset, format!("{}: {e}", dir.display())))
}

fn load_pair(path: &Path) -> CliResult<SurrogatePair> {
    Checkpoint::load(path)
        .and_then(Checkpoint::into_pair)
        .map_err(|e| CliError::new(ErrorKind::Checkpoint, format!("{}: {e}", path.display())))
}

/// Parses a clap command line and runs it. `input` and `output` carry the
/// wizard dialog and tables printed to the terminal.
pub fn run<R: BufRead, W: Write>(argv: &[String], input: &mut R, output: &mut W) -> CliResult<()> {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                write!(output, "{}", e.render())?;
                return Ok(());
            }
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return Err(CliError::new(ErrorKind::Usage, first.trim_start_matches("error: ")));
        }
    };
    run_command(&cli.command, input, output)
}

pub fn run_command<R: BufRead, W: Write>(cmd: &Command, input: &mut R, output: &mut W) -> CliResult<()> {
    let args = cmd.args();
    let name = cmd.name();
    if let Some(flag) = args.given().into_iter().find(|f| !cmd.allowed().contains(f)) {
        return Err(CliError::new(ErrorKind::Usage, format!("--{flag} does not apply to {name}")));
    }
    let threads = threads_from_env()?;
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::GenData(a) => gen_data(a, threads),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval(a, output),
        Command::Design(a) => design_cmd(a, threads, true, input, output),
        Command::Sweep(a) => design_cmd(a, threads, false, input, output),
        Command::Report(a) => report_cmd(a, threads),
    }
}

/// `simulate --spec` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub strategy: String,
    /// Phase ratios in the strategy's own order.
    pub params: Vec<f64>,
    #[serde(default)]
    pub circuit: Option<CircuitOverrides>,
    #[serde(default)]
    pub load: Option<LoadModel>,
    #[serde(default = "default_samples")]
    pub samples_per_period: usize,
    #[serde(default = "default_cycles")]
    pub max_cycles: usize,
    #[serde(default = "default_tol")]
    pub tolerance: f64,
}

fn default_samples() -> usize {
    200
}

fn default_cycles() -> usize {
    400
}

fn default_tol() -> f64 {
    1e-8
}

#[derive(Debug, Serialize)]
struct SimulateSummary<'a> {
    spec: &'a SimulateSpec,
    tuple: modkit_core::converter::PhaseShiftTuple,
    cycles: usize,
    residual: f64,
}

fn simulate(a: &Args) -> CliResult<()> {
    let spec: SimulateSpec = read_json(Args::require(&a.spec, "spec", "simulate")?)?;
    let out = Args::require(&a.out, "out", "simulate")?;
    let strategy: ModulationStrategy = spec.strategy.parse().map_err(|e| CliError::new(ErrorKind::Validation, format!("strategy: {e}")))?;
    let params = ModulationParams::new(strategy, spec.params.clone()).map_err(|e| CliError::new(ErrorKind::Validation, format!("params: {e}")))?;
    let tuple = params.to_phase_shift_tuple().map_err(|e| CliError::new(ErrorKind::Validation, format!("params: {e}")))?;
    let circuit = spec.circuit.clone().unwrap_or_default().apply(Default::default());
    circuit.validate().kind(ErrorKind::Validation)?;
    let grid = circuit.grid(spec.samples_per_period).kind(ErrorKind::Validation)?;
    let sim = simulate_full(&circuit, &spec.load.unwrap_or_default(), &tuple, grid, spec.max_cycles, spec.tolerance)?;
    write_atomically(out, |dir| {
        let mut w = csv::Writer::from_path(dir.join("trace.csv"))?;
        w.write_record(["t", "v_p", "v_s", "i_L", "v_c1", "v_c2"])?;
        let t = &sim.trace;
        for k in 0..grid.len() {
            w.write_record([
                grid.time(k).to_string(),
                t.v_p.values()[k].to_string(),
                t.v_s.values()[k].to_string(),
                t.i_l.values()[k].to_string(),
                t.v_c1.values()[k].to_string(),
                t.v_c2.values()[k].to_string(),
            ])?;
        }
        w.flush()?;
        write_json(
            &dir.join("simulation.json"),
            &SimulateSummary {
                spec: &spec,
                tuple,
                cycles: sim.cycles,
                residual: sim.residual,
            },
        )
    })
}

/// `gen-data --spec` document; every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub strategy: Option<String>,
    pub circuit: Option<CircuitOverrides>,
    pub load: Option<LoadModel>,
    pub ringing: Option<RingingConfig>,
    pub samples_per_period: Option<usize>,
    pub param_box: Option<ParamBox>,
}

fn parse_splits(v: &[f64]) -> CliResult<[f64; 3]> {
    <[f64; 3]>::try_from(v).map_err(|_| CliError::new(ErrorKind::Usage, "--splits takes three fractions a,b,c"))
}

fn gen_data(a: &Args, threads: usize) -> CliResult<()> {
    let out = Args::require(&a.out, "out", "gen-data")?;
    let doc: DataSpec = match &a.spec {
        Some(p) => read_json(p)?,
        None => DataSpec::default(),
    };
    let mut cfg = DatasetConfig::default();
    if let Some(s) = &doc.strategy {
        let s: ModulationStrategy = s.parse().map_err(|e| CliError::new(ErrorKind::Validation, format!("strategy: {e}")))?;
        cfg = cfg.with_strategy(s);
    }
    if let Some(c) = &doc.circuit {
        cfg.circuit = c.apply(cfg.circuit);
    }
    if let Some(l) = doc.load {
        cfg.load = l;
    }
    if let Some(r) = doc.ringing {
        cfg.ringing = r;
    }
    if let Some(k) = doc.samples_per_period {
        cfg.samples_per_period = k;
    }
    if let Some(b) = &doc.param_box {
        cfg.param_box = b.clone();
    }
    if let Some(n) = a.count {
        cfg.count = n;
    }
    if let Some(s) = &a.splits {
        cfg.splits = parse_splits(s)?;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.threads = threads;
    cfg.validate().kind(ErrorKind::Validation)?;
    let data = generate_dataset(&cfg).map_err(|e| CliError::new(ErrorKind::Dataset, e.to_string()))?;
    info!(
        "dataset: {} train, {} val, {} test",
        data.splits.train.len(),
        data.splits.val.len(),
        data.splits.test.len()
    );
    write_atomically(out, |dir| Ok(data.write(dir)?))
}

fn train_cmd(a: &Args) -> CliResult<()> {
    let data_dir = Args::require(&a.data, "data", "train")?;
    let out = Args::require(&a.out, "out", "train")?;
    let mut cfg: TrainConfig = match &a.spec {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate().kind(ErrorKind::Validation)?;
    crate::output::check_target(out)?;
    let data = read_dataset(data_dir)?;
    let init = match &a.checkpoint {
        Some(p) => load_pair(p)?,
        None => SurrogatePair::for_dataset(&data, &cfg).kind(ErrorKind::Training)?,
    };
    let (pair, history) = train(&init, &data, &cfg).kind(ErrorKind::Training)?;
    let ckpt = Checkpoint::new(&pair, &cfg);
    write_atomically(out, |dir| {
        ckpt.save(&dir.join("checkpoint.json")).kind(ErrorKind::Io)?;
        write_table(
            &dir.join("history.csv"),
            &history.records,
            &["stage", "epoch", "data", "physics", "total", "val"],
        )
    })
}

fn eval<W: Write>(a: &Args, output: &mut W) -> CliResult<()> {
    let data = read_dataset(Args::require(&a.data, "data", "eval")?)?;
    let pair = load_pair(Args::require(&a.checkpoint, "checkpoint", "eval")?)?;
    let table = MaeTable::compute(&pair, &data).kind(ErrorKind::Simulation)?;
    let label = if pair.hierarchical { "ModNet+CirNet" } else { "CirNet only" };
    writeln!(output, "{}\n{}", MaeTable::HEADER, table.row(label))?;
    if let Some(out) = &a.out {
        write_atomically(out, |dir| {
            write_table(
                &dir.join("mae.csv"),
                &[(label, table.train, table.val, table.test)],
                &["model", "train_mae", "val_mae", "test_mae"],
            )
        })?;
    }
    Ok(())
}

fn steering(backend: BackendKind, checkpoint: Option<&PathBuf>) -> CliResult<Box<dyn PerformanceEvaluator>> {
    match backend {
        BackendKind::Oracle => Ok(Box::new(Oracle)),
        BackendKind::Surrogate => {
            let path = checkpoint.ok_or_else(|| CliError::new(ErrorKind::Usage, "the surrogate backend needs --checkpoint"))?;
            Ok(Box::new(SurrogateEvaluator::new(load_pair(path)?)))
        }
    }
}

fn design_cmd<R: BufRead, W: Write>(
    a: &Args,
    threads: usize,
    headline: bool,
    input: &mut R,
    output: &mut W,
) -> CliResult<()> {
    let cmd = if headline { "design" } else { "sweep" };
    let out = Args::require(&a.out, "out", cmd)?;
    crate::output::check_target(out)?;
    let mut parsed: ParsedSpec = match &a.spec {
        Some(p) => parse_design_spec(p)?,
        None if headline => wizard(input, output)?,
        None => return Err(CliError::new(ErrorKind::Usage, "sweep needs --spec")),
    };
    if let Some(s) = a.seed {
        parsed.design.seed = s;
    }
    if let Some(b) = a.budget {
        parsed.design.budget = b;
    }
    if let Some(b) = &a.backend {
        parsed.design.backend = b.parse().map_err(|e| CliError::new(ErrorKind::Usage, format!("--backend: {e}")))?;
    }
    parsed.design.validate().kind(ErrorKind::Validation)?;
    parsed.design.threads = threads;
    let steer = steering(parsed.design.backend, a.checkpoint.as_ref())?;
    let bundle = run_report(&parsed, steer.as_ref(), headline)?;
    if let Some(o) = &bundle.summary.design {
        writeln!(
            output,
            "{}: {:?} stress {:.4} A, power error {:.3} W",
            o.resolved_strategy,
            o.best_params.values(),
            o.report.current_stress,
            o.power_error
        )?;
    }
    write_atomically(out, |dir| bundle.write(dir))
}

fn report_cmd(a: &Args, threads: usize) -> CliResult<()> {
    let path = Args::require(&a.spec, "spec", "report")?;
    let out = Args::require(&a.out, "out", "report")?;
    crate::output::check_target(out)?;
    let summary = read_summary(path)?;
    let bundle = bundle_from_summary(summary, threads)?;
    bundle.check_row_counts()?;
    write_atomically(out, |dir| bundle.write(dir))
}
