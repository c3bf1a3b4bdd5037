//! Simulated waveform datasets.
//!
//! Each sequence is one steady-state period of `(v_p, v_s, i_L)` at a
//! modulation point drawn from a scrambled Halton sequence over the
//! strategy's box. Ringing is added to the bridge voltages at every
//! commutation and the inductor current is then re-solved against the
//! non-ideal voltages, so the ringing is visible in `i_L` as well.
//!
//! On disk a dataset is a directory holding `meta.json`, `splits.json` and
//! one `seq_<index>.csv` per sequence with header `t,v_p,v_s,i_L`.

use std::fs;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::converter::{
    edge_indices, inject_nonideality, switching_functions, Grid, ModulationParams, ModulationStrategy,
    PhaseShiftTuple, RingingConfig,
};
use crate::error::{Error, Result};
use crate::sim::{simulate_full, steady_state_current, CircuitParams, LoadModel};

const PRIMES: [u64; 3] = [2, 3, 5];
const MAX_CYCLES: usize = 400;
const STEADY_TOL: f64 = 1e-8;

/// Sampling box of the design variables, in strategy parameter order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParamBox {
    /// Outer shift in [0.05, 0.45], inner shifts in [0, 0.4].
    pub fn default_for(strategy: ModulationStrategy) -> Self {
        let outer = strategy.outer_index();
        let (lower, upper) = (0..strategy.dof())
            .map(|j| if j == outer { (0.05, 0.45) } else { (0.0, 0.4) })
            .unzip();
        Self { lower, upper }
    }

    fn validate(&self, strategy: ModulationStrategy) -> Result<()> {
        if self.lower.len() != strategy.dof() || self.upper.len() != strategy.dof() {
            return Err(Error::Dimension {
                context: "parameter box".into(),
                expected: strategy.dof(),
                got: self.lower.len().min(self.upper.len()),
            });
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if !(0.0 <= *l && l <= u && *u <= 1.0) {
                return Err(Error::out_of_range("parameter box", *l, "0 <= lower <= upper <= 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub circuit: CircuitParams,
    pub load: LoadModel,
    pub strategy: ModulationStrategy,
    pub count: usize,
    pub seed: u64,
    pub ringing: RingingConfig,
    /// Train, validation and test fractions.
    pub splits: [f64; 3],
    pub samples_per_period: usize,
    pub param_box: ParamBox,
    /// 0 simulates on the calling thread.
    pub threads: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            circuit: CircuitParams::default(),
            load: LoadModel::default(),
            strategy: ModulationStrategy::Tps,
            count: 200,
            seed: 0,
            ringing: RingingConfig::default(),
            splits: [0.05, 0.10, 0.85],
            samples_per_period: 200,
            param_box: ParamBox::default_for(ModulationStrategy::Tps),
            threads: 0,
        }
    }
}

impl DatasetConfig {
    pub fn with_strategy(mut self, strategy: ModulationStrategy) -> Self {
        self.strategy = strategy;
        self.param_box = ParamBox::default_for(strategy);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 10 {
            return Err(Error::out_of_range("count", self.count as f64, ">= 10"));
        }
        if self.strategy == ModulationStrategy::Hybrid {
            return Err(Error::InvalidParams(
                "datasets need a concrete strategy; HYBRID is resolved only at design time".into(),
            ));
        }
        let total: f64 = self.splits.iter().sum();
        if self.splits.iter().any(|f| !(*f >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "split fractions must be non-negative and sum to 1, got {:?}",
                self.splits
            )));
        }
        self.param_box.validate(self.strategy)?;
        self.ringing.validate()?;
        self.circuit.validate()?;
        self.load.validate()?;
        Grid::new(self.samples_per_period, self.circuit.period())?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub index: usize,
    pub params: ModulationParams,
    pub tuple: PhaseShiftTuple,
    /// Period-mean DC-link voltages of the converged simulation.
    pub v_c1_dc: f64,
    pub v_c2_dc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub circuit: CircuitParams,
    pub load: LoadModel,
    pub strategy: ModulationStrategy,
    pub seed: u64,
    pub count: usize,
    pub splits: [f64; 3],
    pub grid: Grid,
    pub ringing: RingingConfig,
    pub param_box: ParamBox,
    pub sequences: Vec<SequenceMeta>,
    pub skipped: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub meta: SequenceMeta,
    pub v_p: Vec<f64>,
    pub v_s: Vec<f64>,
    pub i_l: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Sequence indices of each split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub sequences: Vec<Sequence>,
    pub splits: Splits,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut x = 0.0;
    while i > 0 {
        x += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    x
}

/// Halton point `index` in the unit cube, shifted modulo 1 by a per-seed
/// random offset (Cranley-Patterson rotation).
pub fn halton_point(index: usize, dim: usize, shift: &[f64]) -> Vec<f64> {
    (0..dim)
        .map(|j| (radical_inverse(index as u64 + 1, PRIMES[j]) + shift[j]).fract())
        .collect()
}

fn rotation(seed: u64, dim: usize) -> Vec<f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.gen::<f64>()).collect()
}

/// Split sizes for `n` sequences: rounded train and validation counts, the
/// remainder goes to test.
pub fn split_counts(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let train = ((fractions[0] * n as f64).round() as usize).min(n);
    let val = ((fractions[1] * n as f64).round() as usize).min(n - train);
    [train, val, n - train - val]
}

fn simulate_one(cfg: &DatasetConfig, grid: Grid, index: usize, shift: &[f64]) -> Result<Sequence> {
    let u = halton_point(index, cfg.strategy.dof(), shift);
    let b = &cfg.param_box;
    let values = u
        .iter()
        .enumerate()
        .map(|(j, x)| b.lower[j] + x * (b.upper[j] - b.lower[j]))
        .collect();
    let params = ModulationParams::new(cfg.strategy, values)?;
    let tuple = params.to_phase_shift_tuple()?;
    let sim = simulate_full(&cfg.circuit, &cfg.load, &tuple, grid, MAX_CYCLES, STEADY_TOL)?;
    let (s_pri, s_sec) = switching_functions(&tuple, grid);
    let v_p = inject_nonideality(&sim.trace.v_p, &edge_indices(&s_pri), &cfg.ringing)?;
    let v_s = inject_nonideality(&sim.trace.v_s, &edge_indices(&s_sec), &cfg.ringing)?;
    let i_l = steady_state_current(&cfg.circuit, &v_p, &v_s)?;
    Ok(Sequence {
        meta: SequenceMeta {
            index,
            params,
            tuple,
            v_c1_dc: sim.trace.v_c1.mean(),
            v_c2_dc: sim.trace.v_c2.mean(),
        },
        v_p: v_p.into_values(),
        v_s: v_s.into_values(),
        i_l: i_l.into_values(),
    })
}

pub fn generate_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    cfg.validate()?;
    let grid = Grid::new(cfg.samples_per_period, cfg.circuit.period())?;
    let shift = rotation(cfg.seed, cfg.strategy.dof());
    let run = |i: usize| simulate_one(cfg, grid, i, &shift);
    let results: Vec<Result<Sequence>> = if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
        pool.install(|| (0..cfg.count).into_par_iter().map(run).collect())
    } else {
        (0..cfg.count).map(run).collect()
    };
    let mut sequences = Vec::with_capacity(cfg.count);
    let mut skipped = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => sequences.push(s),
            Err(e) => {
                warn!("sequence {i} skipped: {e}");
                skipped.push(i);
            }
        }
    }
    if skipped.len() * 20 > cfg.count {
        return Err(Error::Dataset(format!(
            "{} of {} sequences failed to reach steady state",
            skipped.len(),
            cfg.count
        )));
    }
    let mut order: Vec<usize> = sequences.iter().map(|s| s.meta.index).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    order.shuffle(&mut rng);
    let [n_train, n_val, _] = split_counts(order.len(), cfg.splits);
    let pick = |range: std::ops::Range<usize>| {
        let mut v = order[range].to_vec();
        v.sort_unstable();
        v
    };
    let splits = Splits {
        train: pick(0..n_train),
        val: pick(n_train..n_train + n_val),
        test: pick(n_train + n_val..order.len()),
    };
    let meta = DatasetMeta {
        circuit: cfg.circuit,
        load: cfg.load,
        strategy: cfg.strategy,
        seed: cfg.seed,
        count: cfg.count,
        splits: cfg.splits,
        grid,
        ringing: cfg.ringing,
        param_box: cfg.param_box.clone(),
        sequences: sequences.iter().map(|s| s.meta.clone()).collect(),
        skipped,
    };
    Ok(Dataset {
        meta,
        sequences,
        splits,
    })
}

impl Dataset {
    pub fn grid(&self) -> Grid {
        self.meta.grid
    }

    pub fn sequence(&self, index: usize) -> Option<&Sequence> {
        self.sequences.iter().find(|s| s.meta.index == index)
    }

    pub fn split(&self, split: Split) -> Vec<&Sequence> {
        self.splits
            .get(split)
            .iter()
            .filter_map(|&i| self.sequence(i))
            .collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&self.meta)? + "\n")?;
        fs::write(dir.join("splits.json"), serde_json::to_string_pretty(&self.splits)? + "\n")?;
        let grid = self.grid();
        for s in &self.sequences {
            let mut w = csv::Writer::from_path(dir.join(format!("seq_{}.csv", s.meta.index)))?;
            w.write_record(["t", "v_p", "v_s", "i_L"])?;
            for k in 0..grid.len() {
                w.write_record([
                    grid.time(k).to_string(),
                    s.v_p[k].to_string(),
                    s.v_s[k].to_string(),
                    s.i_l[k].to_string(),
                ])?;
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
        let splits: Splits = serde_json::from_str(&fs::read_to_string(dir.join("splits.json"))?)?;
        let k_len = meta.grid.len();
        let mut sequences = Vec::with_capacity(meta.sequences.len());
        for m in &meta.sequences {
            let path = dir.join(format!("seq_{}.csv", m.index));
            let mut r = csv::Reader::from_path(&path)?;
            let header = r.headers()?.clone();
            if header.iter().collect::<Vec<_>>() != ["t", "v_p", "v_s", "i_L"] {
                return Err(Error::Dataset(format!(
                    "{}: unexpected header {:?}",
                    path.display(),
                    header
                )));
            }
            let (mut v_p, mut v_s, mut i_l) = (Vec::new(), Vec::new(), Vec::new());
            for rec in r.records() {
                let rec = rec?;
                let field = |j: usize| -> Result<f64> {
                    rec.get(j)
                        .and_then(|x| x.parse().ok())
                        .ok_or_else(|| Error::Dataset(format!("{}: bad number in row {:?}", path.display(), rec)))
                };
                v_p.push(field(1)?);
                v_s.push(field(2)?);
                i_l.push(field(3)?);
            }
            if i_l.len() != k_len {
                return Err(Error::Dimension {
                    context: path.display().to_string(),
                    expected: k_len,
                    got: i_l.len(),
                });
            }
            sequences.push(Sequence {
                meta: m.clone(),
                v_p,
                v_s,
                i_l,
            });
        }
        for split in Split::ALL {
            for i in splits.get(split) {
                if !meta.sequences.iter().any(|s| s.index == *i) {
                    return Err(Error::Dataset(format!("{} split names unknown sequence {i}", split.as_str())));
                }
            }
        }
        Ok(Self {
            meta,
            sequences,
            splits,
        })
    }
}
