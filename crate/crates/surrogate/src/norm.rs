//! Per-channel z-score scalers. Fitted on the training split only.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurrogateError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: f64,
    pub std: f64,
}

impl Scaler {
    pub const IDENTITY: Scaler = Scaler { mean: 0.0, std: 1.0 };

    /// Mean and population standard deviation over all values. A constant
    /// channel gets unit scale so it maps to zero instead of dividing by 0.
    pub fn fit<'a>(channels: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let (mut n, mut sum, mut sq) = (0usize, 0.0, 0.0);
        let chunks: Vec<&[f64]> = channels.into_iter().collect();
        for c in &chunks {
            n += c.len();
            sum += c.iter().sum::<f64>();
        }
        if n == 0 {
            return Err(SurrogateError::Dataset("cannot fit a scaler on no data".into()));
        }
        let mean = sum / n as f64;
        for c in &chunks {
            sq += c.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
        }
        let std = (sq / n as f64).sqrt();
        if !mean.is_finite() || !std.is_finite() {
            return Err(SurrogateError::Dataset("non-finite values in scaler fit".into()));
        }
        Ok(Self {
            mean,
            std: if std > 0.0 { std } else { 1.0 },
        })
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Scalers of the three waveform channels. Ideal and predicted voltages use
/// the same scaler as the measured channel they stand in for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub v_p: Scaler,
    pub v_s: Scaler,
    pub i_l: Scaler,
}

impl Normalization {
    pub fn identity() -> Self {
        Self {
            v_p: Scaler::IDENTITY,
            v_s: Scaler::IDENTITY,
            i_l: Scaler::IDENTITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_matches_hand_values() {
        let a = [1.0, 2.0, 3.0];
        let b = [4.0, 5.0];
        let s = Scaler::fit([&a[..], &b[..]]).unwrap();
        assert!((s.mean - 3.0).abs() < 1e-15);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(Scaler::fit([&[7.0, 7.0][..]]).unwrap().std, 1.0);
        assert!(Scaler::fit(std::iter::empty::<&[f64]>()).is_err());
    }
}
