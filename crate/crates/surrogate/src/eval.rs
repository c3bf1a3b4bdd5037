//! Free-running evaluation. Errors are in amperes: the rollout starts from
//! the true initial current and is denormalized before comparison.

use std::fmt;

use modkit_core::dataset::{Dataset, Sequence, Split};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SurrogateError};
use crate::model::{cirnet_rollout_voltages, SurrogatePair};
use crate::train::drive_voltages;

/// Mean absolute difference of two equally long slices.
pub fn mae(prediction: &[f64], truth: &[f64]) -> Result<f64> {
    if prediction.len() != truth.len() || truth.is_empty() {
        return Err(SurrogateError::Dimension {
            context: "mae".into(),
            expected: truth.len(),
            got: prediction.len(),
        });
    }
    Ok(prediction.iter().zip(truth).map(|(a, b)| (a - b).abs()).sum::<f64>() / truth.len() as f64)
}

/// Inductor-current rollout of a dataset sequence, from its true `i_L(0)`.
pub fn predict_current(pair: &SurrogatePair, dataset: &Dataset, seq: &Sequence) -> Result<Vec<f64>> {
    let modnet = pair.hierarchical.then_some(&pair.modnet);
    let (vp, vs) = drive_voltages(modnet, &pair.normalization, seq, dataset.grid())?;
    cirnet_rollout_voltages(&pair.cirnet, &pair.normalization, &vp, &vs, seq.i_l[0])
}

/// MAE of any per-sequence predictor, averaged over every step of every
/// sequence in the split.
pub fn split_mae(dataset: &Dataset, split: Split, predict: impl Fn(&Sequence) -> Result<Vec<f64>>) -> Result<f64> {
    let seqs = dataset.split(split);
    if seqs.is_empty() {
        return Err(SurrogateError::Dataset(format!("{} split is empty", split.as_str())));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in seqs {
        let p = predict(s)?;
        sum += mae(&p, &s.i_l)? * s.i_l.len() as f64;
        n += s.i_l.len();
    }
    Ok(sum / n as f64)
}

pub fn evaluate_mae(pair: &SurrogatePair, dataset: &Dataset, split: Split) -> Result<f64> {
    split_mae(dataset, split, |s| predict_current(pair, dataset, s))
}

/// Train / validation / test MAE of one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaeTable {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl MaeTable {
    pub fn compute(pair: &SurrogatePair, dataset: &Dataset) -> Result<Self> {
        let get = |s| {
            if dataset.split(s).is_empty() {
                Ok(f64::NAN)
            } else {
                evaluate_mae(pair, dataset, s)
            }
        };
        Ok(Self {
            train: get(Split::Train)?,
            val: get(Split::Val)?,
            test: get(Split::Test)?,
        })
    }

    pub fn row(&self, label: &str) -> String {
        format!("| {label} | {:.4} | {:.4} | {:.4} |", self.train, self.val, self.test)
    }

    pub const HEADER: &'static str = "| Model | Train MAE (A) | Val MAE (A) | Test MAE (A) |\n|---|---|---|---|";
}

impl fmt::Display for MaeTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", Self::HEADER)?;
        write!(f, "{}", self.row("surrogate"))
    }
}
