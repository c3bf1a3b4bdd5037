//! Two-stage training: ModNet first, then CirNet with ModNet frozen.
//!
//! Losses are evaluated in normalized units. The CirNet residual is divided
//! by `L * sigma_i`, which turns it into a normalized current error. Besides
//! the teacher-forced residual, a physics-informed run (`lambda_p > 0` with
//! `free_run_physics`) also penalizes the residual along the network's own
//! free-running trajectory (inputs detached, reference current replaced by
//! the rollout). That term needs no labels and is what carries the ODE into
//! states the teacher-forced data never visits.

use log::{debug, info};
use modkit_core::converter::{edge_indices, switching_functions, Grid};
use modkit_core::dataset::{Dataset, Sequence, Split};
use modkit_core::sim::CircuitParams;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SurrogateError};
use crate::lngru::SequenceModel;
use crate::losses::{physics_residual, sync_mask};
use crate::model::{cirnet_rollout_voltages, modnet_rollout_ideal, SurrogatePair};
use crate::norm::{Normalization, Scaler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda_d: f64,
    pub lambda_p: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// ModNet epochs; `None` uses `epochs`.
    pub modnet_epochs: Option<usize>,
    /// Sequences per update; 0 means the whole training split.
    pub batch_size: usize,
    pub seed: u64,
    pub teacher_forcing: bool,
    pub grad_clip: f64,
    pub hidden_dim: usize,
    pub layers: usize,
    pub residual: bool,
    pub edge_window: usize,
    pub hierarchical: bool,
    pub free_run_physics: bool,
    /// Validation rollout interval in epochs; the best validated parameters
    /// are kept.
    pub validate_every: usize,
    /// Start from all-zero weights (gains included) instead of a random
    /// draw. With the residual skip an untrained zero network predicts a
    /// constant current.
    pub zero_init: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_d: 1.0,
            lambda_p: 1.0,
            learning_rate: 1e-3,
            epochs: 2000,
            modnet_epochs: None,
            batch_size: 0,
            seed: 0,
            teacher_forcing: true,
            grad_clip: 1.0,
            hidden_dim: 32,
            layers: 2,
            residual: true,
            edge_window: 3,
            hierarchical: true,
            free_run_physics: true,
            validate_every: 10,
            zero_init: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SurrogateError::Config(m));
        if !(self.lambda_d >= 0.0) || !(self.lambda_p >= 0.0) {
            return bad(format!("loss weights must be non-negative ({}, {})", self.lambda_d, self.lambda_p));
        }
        if self.lambda_d == 0.0 && self.lambda_p == 0.0 {
            return bad("lambda_d and lambda_p cannot both be zero".into());
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.grad_clip > 0.0) {
            return bad(format!("grad_clip must be positive, got {}", self.grad_clip));
        }
        if self.hidden_dim == 0 || self.layers == 0 {
            return bad("hidden_dim and layers must be positive".into());
        }
        if self.validate_every == 0 {
            return bad("validate_every must be positive".into());
        }
        Ok(())
    }

    fn modnet_epochs(&self) -> usize {
        self.modnet_epochs.unwrap_or(self.epochs)
    }
}

/// Adaptive-moment optimizer with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Scales `grad` to at most `max_norm`; returns the norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Modnet,
    Cirnet,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Modnet => "modnet",
            Stage::Cirnet => "cirnet",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: Stage,
    pub epoch: usize,
    pub data: f64,
    pub physics: f64,
    pub total: f64,
    /// Free-running validation error: normalized MSE for ModNet, MAE in
    /// amperes for CirNet.
    pub val: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
    pub best_modnet_epoch: Option<usize>,
    pub best_cirnet_epoch: Option<usize>,
}

impl History {
    pub fn stage(&self, stage: Stage) -> impl Iterator<Item = &EpochRecord> {
        self.records.iter().filter(move |r| r.stage == stage)
    }
}

/// z-score scalers of the training split.
pub fn fit_normalization(dataset: &Dataset) -> Result<Normalization> {
    let train = dataset.split(Split::Train);
    if train.is_empty() {
        return Err(SurrogateError::Dataset("training split is empty".into()));
    }
    Ok(Normalization {
        v_p: Scaler::fit(train.iter().map(|s| s.v_p.as_slice()))?,
        v_s: Scaler::fit(train.iter().map(|s| s.v_s.as_slice()))?,
        i_l: Scaler::fit(train.iter().map(|s| s.i_l.as_slice()))?,
    })
}

impl SurrogatePair {
    /// Untrained pair for a dataset: scalers from its training split,
    /// weights from `cfg.seed`.
    pub fn for_dataset(dataset: &Dataset, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let norm = fit_normalization(dataset)?;
        let mut pair = Self::init(
            cfg.hidden_dim,
            cfg.layers,
            cfg.residual,
            norm,
            dataset.grid().samples_per_period,
            cfg.seed,
        )?;
        pair.hierarchical = cfg.hierarchical;
        if cfg.zero_init {
            pair.modnet.params.iter_mut().for_each(|p| *p = 0.0);
            pair.cirnet.params.iter_mut().for_each(|p| *p = 0.0);
        }
        Ok(pair)
    }
}

/// Commanded (ideal) bridge voltages of a sequence at its DC-link levels.
/// The levels are signed: a resistive load can settle at a negative output
/// voltage when the command reverses power flow.
pub fn ideal_voltages(seq: &Sequence, grid: Grid) -> Result<(Vec<f64>, Vec<f64>)> {
    let (sp, ss) = switching_functions(&seq.meta.tuple, grid);
    Ok((
        sp.values().iter().map(|s| s * seq.meta.v_c1_dc).collect(),
        ss.values().iter().map(|s| s * seq.meta.v_c2_dc).collect(),
    ))
}

/// Commutation samples of both bridges.
pub fn commutation_samples(seq: &Sequence, grid: Grid) -> Vec<usize> {
    let (sp, ss) = switching_functions(&seq.meta.tuple, grid);
    let mut e = edge_indices(&sp);
    e.extend(edge_indices(&ss));
    e.sort_unstable();
    e.dedup();
    e
}

/// Voltages that drive CirNet for a sequence: the ModNet rollout, or the
/// ideal waveforms when `modnet` is `None`.
pub fn drive_voltages(
    modnet: Option<&SequenceModel>,
    norm: &Normalization,
    seq: &Sequence,
    grid: Grid,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (ip, is) = ideal_voltages(seq, grid)?;
    match modnet {
        Some(m) => {
            let v0 = (ip[ip.len() - 1], is[is.len() - 1]);
            modnet_rollout_ideal(m, norm, &ip, &is, v0)
        }
        None => Ok((ip, is)),
    }
}

fn batches(n: usize, batch_size: usize, epoch_rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    if batch_size == 0 || batch_size >= n {
        return vec![order];
    }
    order.shuffle(epoch_rng);
    order.chunks(batch_size).map(|c| c.to_vec()).collect()
}

struct ModnetSample {
    ideal: Vec<f64>,
    truth: Vec<f64>,
    mask: Vec<bool>,
}

fn modnet_sample(seq: &Sequence, grid: Grid, norm: &Normalization, edge_window: usize) -> Result<ModnetSample> {
    let (ip, is) = ideal_voltages(seq, grid)?;
    let k_len = ip.len();
    let mut ideal = Vec::with_capacity(2 * k_len);
    let mut truth = Vec::with_capacity(2 * k_len);
    for k in 0..k_len {
        ideal.extend([norm.v_p.normalize(ip[k]), norm.v_s.normalize(is[k])]);
        truth.extend([norm.v_p.normalize(seq.v_p[k]), norm.v_s.normalize(seq.v_s[k])]);
    }
    let mask = sync_mask(k_len, &commutation_samples(seq, grid), edge_window);
    Ok(ModnetSample {
        ideal,
        truth,
        mask,
    })
}

fn free_run_modnet(model: &SequenceModel, s: &ModnetSample) -> Result<Vec<f64>> {
    let k_len = s.mask.len();
    let mut state = model.initial_state();
    let mut prev = [s.ideal[2 * k_len - 2], s.ideal[2 * k_len - 1]];
    let mut out = Vec::with_capacity(2 * k_len);
    let mut y = [0.0; 2];
    for k in 0..k_len {
        let x = [prev[0], prev[1], s.ideal[2 * k], s.ideal[2 * k + 1]];
        model.step(&mut state, &x, &mut y, None)?;
        out.extend(y);
        prev = y;
    }
    Ok(out)
}

fn modnet_val_mse(model: &SequenceModel, samples: &[ModnetSample]) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in samples {
        let y = free_run_modnet(model, s)?;
        sum += y.iter().zip(&s.truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        n += y.len();
    }
    Ok(sum / n.max(1) as f64)
}

fn diverged(stage: Stage, epoch: usize) -> impl Fn(SurrogateError) -> SurrogateError {
    move |_| SurrogateError::Divergence {
        stage: stage.as_str().into(),
        epoch,
    }
}

fn split_or_err<'a>(dataset: &'a Dataset, split: Split) -> Result<Vec<&'a Sequence>> {
    let v = dataset.split(split);
    if v.is_empty() && split == Split::Train {
        return Err(SurrogateError::Dataset("training split is empty".into()));
    }
    Ok(v)
}

/// Trains ModNet from `init`; returns the best-validated parameters.
pub fn train_modnet(
    init: &SequenceModel,
    dataset: &Dataset,
    norm: &Normalization,
    cfg: &TrainConfig,
) -> Result<(SequenceModel, Vec<EpochRecord>)> {
    cfg.validate()?;
    let grid = dataset.grid();
    let train: Vec<ModnetSample> = split_or_err(dataset, Split::Train)?
        .into_iter()
        .map(|s| modnet_sample(s, grid, norm, cfg.edge_window))
        .collect::<Result<_>>()?;
    let val: Vec<ModnetSample> = split_or_err(dataset, Split::Val)?
        .into_iter()
        .map(|s| modnet_sample(s, grid, norm, cfg.edge_window))
        .collect::<Result<_>>()?;
    let mut model = init.clone();
    let mut adam = Adam::new(model.params.len(), cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(7);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut records = Vec::new();
    let epochs = cfg.modnet_epochs();
    let k_len = grid.samples_per_period;
    for epoch in 0..epochs {
        let fail = diverged(Stage::Modnet, epoch);
        let (mut data_sum, mut phys_sum) = (0.0, 0.0);
        for batch in batches(train.len(), cfg.batch_size, &mut rng) {
            let nb = batch.len() as f64;
            let mut grad = vec![0.0; model.params.len()];
            for &j in &batch {
                let s = &train[j];
                let prev_src = if cfg.teacher_forcing {
                    s.truth.clone()
                } else {
                    free_run_modnet(&model, s).map_err(&fail)?
                };
                let mut x = Vec::with_capacity(4 * k_len);
                for k in 0..k_len {
                    let p = (k + k_len - 1) % k_len;
                    x.extend([prev_src[2 * p], prev_src[2 * p + 1], s.ideal[2 * k], s.ideal[2 * k + 1]]);
                }
                let (y, cache) = model.forward(&x).map_err(&fail)?;
                let mut d_out = vec![0.0; y.len()];
                let mut data = 0.0;
                for i in 0..y.len() {
                    let e = y[i] - s.truth[i];
                    data += e * e;
                    d_out[i] += 2.0 * cfg.lambda_d * e / (y.len() as f64 * nb);
                }
                data_sum += data / y.len() as f64;
                let m = s.mask.iter().filter(|b| **b).count() * 2;
                if m > 0 {
                    let mut phys = 0.0;
                    for k in (0..k_len).filter(|&k| s.mask[k]) {
                        for c in 0..2 {
                            let e = y[2 * k + c] - s.ideal[2 * k + c];
                            phys += e * e;
                            d_out[2 * k + c] += 2.0 * cfg.lambda_p * e / (m as f64 * nb);
                        }
                    }
                    phys_sum += phys / m as f64;
                }
                model.backward_into(&cache, &d_out, &mut grad)?;
            }
            clip_grad_norm(&mut grad, cfg.grad_clip);
            adam.step(&mut model.params, &grad);
        }
        let n = train.len() as f64;
        let (data, physics) = (data_sum / n, phys_sum / n);
        let total = cfg.lambda_d * data + cfg.lambda_p * physics;
        if !total.is_finite() {
            return Err(fail(SurrogateError::Numeric { step: 0 }));
        }
        let last = epoch + 1 == epochs;
        let val_mse = if !val.is_empty() && ((epoch + 1) % cfg.validate_every == 0 || last) {
            let v = modnet_val_mse(&model, &val).map_err(&fail)?;
            if best.as_ref().map_or(true, |b| v < b.0) {
                best = Some((v, epoch, model.params.clone()));
            }
            Some(v)
        } else {
            None
        };
        debug!("modnet epoch {epoch}: data {data:.4e} physics {physics:.4e} val {val_mse:?}");
        records.push(EpochRecord {
            stage: Stage::Modnet,
            epoch,
            data,
            physics,
            total,
            val: val_mse,
        });
    }
    if let Some((v, epoch, params)) = best {
        info!("modnet: best validation MSE {v:.4e} at epoch {epoch}");
        model.params = params;
    }
    Ok((model, records))
}

struct CirnetSample<'a> {
    seq: &'a Sequence,
    v_p: Vec<f64>,
    v_s: Vec<f64>,
}

/// Normalized physics residual and its derivative with respect to the
/// normalized prediction (which is 1).
fn residuals_normalized(
    pred_n: &[f64],
    i_prev: &[f64],
    s: &CirnetSample,
    circuit: &CircuitParams,
    norm: &Normalization,
    dt: f64,
) -> Result<Vec<f64>> {
    let next: Vec<f64> = pred_n.iter().map(|y| norm.i_l.denormalize(*y)).collect();
    let r = physics_residual(&next, i_prev, &s.v_p, &s.v_s, circuit, dt)?;
    let scale = circuit.inductance * norm.i_l.std;
    Ok(r.into_iter().map(|x| x / scale).collect())
}

/// Free-running rollout with cache; returns (inputs' current in amperes,
/// normalized outputs, cache).
fn free_run_cached(
    model: &SequenceModel,
    s: &CirnetSample,
    norm: &Normalization,
) -> Result<(Vec<f64>, Vec<f64>, crate::lngru::Cache)> {
    let k_len = s.v_p.len();
    let mut state = model.initial_state();
    let mut cache = model.new_cache();
    let mut i = norm.i_l.normalize(s.seq.i_l[0]);
    let mut inputs = Vec::with_capacity(k_len);
    let mut outs = Vec::with_capacity(k_len);
    let mut y = [0.0];
    for k in 0..k_len {
        inputs.push(norm.i_l.denormalize(i));
        let x = [i, norm.v_p.normalize(s.v_p[k]), norm.v_s.normalize(s.v_s[k])];
        model.step(&mut state, &x, &mut y, Some(&mut cache))?;
        outs.push(y[0]);
        i = y[0];
    }
    Ok((inputs, outs, cache))
}

fn cirnet_val_mae(model: &SequenceModel, val: &[CirnetSample], norm: &Normalization) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in val {
        let pred = cirnet_rollout_voltages(model, norm, &s.v_p, &s.v_s, s.seq.i_l[0])?;
        sum += pred.iter().zip(&s.seq.i_l).map(|(a, b)| (a - b).abs()).sum::<f64>();
        n += pred.len();
    }
    Ok(sum / n.max(1) as f64)
}

fn cirnet_samples<'a>(
    seqs: Vec<&'a Sequence>,
    modnet: Option<&SequenceModel>,
    norm: &Normalization,
    grid: Grid,
) -> Result<Vec<CirnetSample<'a>>> {
    seqs.into_iter()
        .map(|seq| {
            let (v_p, v_s) = drive_voltages(modnet, norm, seq, grid)?;
            Ok(CirnetSample { seq, v_p, v_s })
        })
        .collect()
}

/// Trains CirNet from `init`. `modnet` supplies the drive voltages; `None`
/// trains the CirNet-only variant on ideal voltages.
pub fn train_cirnet(
    init: &SequenceModel,
    modnet: Option<&SequenceModel>,
    dataset: &Dataset,
    norm: &Normalization,
    cfg: &TrainConfig,
) -> Result<(SequenceModel, Vec<EpochRecord>)> {
    cfg.validate()?;
    let grid = dataset.grid();
    let circuit = dataset.meta.circuit;
    let dt = grid.dt();
    let train = cirnet_samples(split_or_err(dataset, Split::Train)?, modnet, norm, grid)?;
    let val = cirnet_samples(split_or_err(dataset, Split::Val)?, modnet, norm, grid)?;
    let k_len = grid.samples_per_period;
    let mut model = init.clone();
    let mut adam = Adam::new(model.params.len(), cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(8);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut records = Vec::new();
    let free_run = cfg.lambda_p > 0.0 && cfg.free_run_physics;
    for epoch in 0..cfg.epochs {
        let fail = diverged(Stage::Cirnet, epoch);
        let (mut data_sum, mut phys_sum) = (0.0, 0.0);
        for batch in batches(train.len(), cfg.batch_size, &mut rng) {
            let nb = batch.len() as f64;
            let scale = 2.0 / (k_len as f64 * nb);
            let mut grad = vec![0.0; model.params.len()];
            for &j in &batch {
                let s = &train[j];
                let i_true = &s.seq.i_l;
                let i_in: Vec<f64> = if cfg.teacher_forcing {
                    i_true.clone()
                } else {
                    cirnet_rollout_voltages(&model, norm, &s.v_p, &s.v_s, i_true[0]).map_err(&fail)?
                };
                let mut x = Vec::with_capacity(3 * k_len);
                for k in 0..k_len {
                    x.extend([
                        norm.i_l.normalize(i_in[k]),
                        norm.v_p.normalize(s.v_p[k]),
                        norm.v_s.normalize(s.v_s[k]),
                    ]);
                }
                let (y, cache) = model.forward(&x).map_err(&fail)?;
                let mut d_out = vec![0.0; k_len];
                let mut data = 0.0;
                for k in 0..k_len {
                    let e = y[k] - norm.i_l.normalize(i_true[(k + 1) % k_len]);
                    data += e * e;
                    d_out[k] += cfg.lambda_d * scale * e;
                }
                data_sum += data / k_len as f64;
                let r = residuals_normalized(&y, i_true, s, &circuit, norm, dt)?;
                let mut phys = 0.0;
                for k in 0..k_len {
                    phys += r[k] * r[k];
                    d_out[k] += cfg.lambda_p * scale * r[k];
                }
                phys_sum += phys / k_len as f64;
                model.backward_into(&cache, &d_out, &mut grad)?;
                if free_run {
                    let (i_prev, y_fr, cache_fr) = free_run_cached(&model, s, norm).map_err(&fail)?;
                    let r = residuals_normalized(&y_fr, &i_prev, s, &circuit, norm, dt)?;
                    let mut phys = 0.0;
                    let d_fr: Vec<f64> = r
                        .iter()
                        .map(|x| {
                            phys += x * x;
                            cfg.lambda_p * scale * x
                        })
                        .collect();
                    phys_sum += phys / k_len as f64;
                    model.backward_into(&cache_fr, &d_fr, &mut grad)?;
                }
            }
            clip_grad_norm(&mut grad, cfg.grad_clip);
            adam.step(&mut model.params, &grad);
        }
        let n = train.len() as f64;
        let (data, physics) = (data_sum / n, phys_sum / n);
        let total = cfg.lambda_d * data + cfg.lambda_p * physics;
        if !total.is_finite() {
            return Err(fail(SurrogateError::Numeric { step: 0 }));
        }
        let last = epoch + 1 == cfg.epochs;
        let val_mae = if !val.is_empty() && ((epoch + 1) % cfg.validate_every == 0 || last) {
            // a diverging free rollout is a bad candidate, not a failure
            let v = cirnet_val_mae(&model, &val, norm).unwrap_or(f64::INFINITY);
            if best.as_ref().map_or(true, |b| v < b.0) {
                best = Some((v, epoch, model.params.clone()));
            }
            Some(v)
        } else {
            None
        };
        debug!("cirnet epoch {epoch}: data {data:.4e} physics {physics:.4e} val {val_mae:?}");
        records.push(EpochRecord {
            stage: Stage::Cirnet,
            epoch,
            data,
            physics,
            total,
            val: val_mae,
        });
    }
    if let Some((v, epoch, params)) = best {
        info!("cirnet: best validation MAE {v:.4e} A at epoch {epoch}");
        model.params = params;
    }
    Ok((model, records))
}

/// Full two-stage training starting from `pair`.
pub fn train(pair: &SurrogatePair, dataset: &Dataset, cfg: &TrainConfig) -> Result<(SurrogatePair, History)> {
    cfg.validate()?;
    if dataset.grid().samples_per_period != pair.samples_per_period {
        return Err(SurrogateError::Dimension {
            context: "dataset samples per period".into(),
            expected: pair.samples_per_period,
            got: dataset.grid().samples_per_period,
        });
    }
    let norm = pair.normalization;
    let mut history = History::default();
    let modnet = if cfg.hierarchical {
        let (m, rec) = train_modnet(&pair.modnet, dataset, &norm, cfg)?;
        history.best_modnet_epoch = best_epoch(&rec);
        history.records.extend(rec);
        m
    } else {
        pair.modnet.clone()
    };
    let (cirnet, rec) = train_cirnet(&pair.cirnet, cfg.hierarchical.then_some(&modnet), dataset, &norm, cfg)?;
    history.best_cirnet_epoch = best_epoch(&rec);
    history.records.extend(rec);
    let out = SurrogatePair::new(modnet, cirnet, norm, cfg.hierarchical, pair.samples_per_period)?;
    Ok((out, history))
}

fn best_epoch(records: &[EpochRecord]) -> Option<usize> {
    records
        .iter()
        .filter_map(|r| r.val.map(|v| (v, r.epoch)))
        .fold(None, |b: Option<(f64, usize)>, (v, e)| match b {
            Some((bv, _)) if bv <= v => b,
            _ => Some((v, e)),
        })
        .map(|(_, e)| e)
}
