//! Composite losses of the two networks.
//!
//! CirNet: `l = lambda_d * l_d + lambda_p * l_p` with
//! `l_d = mean (i_hat(t_{k+1}) - i*(t_{k+1}))^2`, `l_p = mean r_k^2` and
//!
//! ```text
//! r_k = L (i_hat(t_{k+1}) - i*(t_k)) - (v_p(t_{k+1}) - n v_s(t_{k+1}) - R_L i*(t_k)) dt
//! ```
//!
//! The voltage at `t_{k+1}` is whatever drives the step from `t_k` to
//! `t_{k+1}`; callers holding zero-order-hold samples (value `k` held on
//! `[t_k, t_{k+1})`) pass those samples as the `t_{k+1}` voltages.
//!
//! ModNet: data MSE everywhere plus MSE against the ideal three-level
//! waveform on samples farther than `edge_window` samples from every
//! commutation.

use modkit_core::sim::CircuitParams;

use crate::error::{Result, SurrogateError};

fn check_len(context: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(SurrogateError::Dimension {
            context: context.into(),
            expected,
            got,
        });
    }
    Ok(())
}

fn check_weights(lambda_d: f64, lambda_p: f64) -> Result<()> {
    if !(lambda_d >= 0.0) || !(lambda_p >= 0.0) {
        return Err(SurrogateError::Domain(format!(
            "loss weights must be non-negative, got lambda_d = {lambda_d}, lambda_p = {lambda_p}"
        )));
    }
    Ok(())
}

fn mean_sq(x: impl Iterator<Item = f64>) -> f64 {
    let (n, s) = x.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v * v));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Per-step residual, all slices aligned on the step index `k`:
/// `i_next[k]` is the prediction at `t_{k+1}`, `i_prev[k]` the reference at
/// `t_k`, and the voltages are taken at `t_{k+1}`.
pub fn physics_residual(
    i_next: &[f64],
    i_prev: &[f64],
    v_p_next: &[f64],
    v_s_next: &[f64],
    circuit: &CircuitParams,
    dt: f64,
) -> Result<Vec<f64>> {
    let t = i_next.len();
    check_len("physics residual i_prev", t, i_prev.len())?;
    check_len("physics residual v_p", t, v_p_next.len())?;
    check_len("physics residual v_s", t, v_s_next.len())?;
    let (l, n, r) = (circuit.inductance, circuit.turns_ratio, circuit.resistance);
    Ok((0..t)
        .map(|k| l * (i_next[k] - i_prev[k]) - (v_p_next[k] - n * v_s_next[k] - r * i_prev[k]) * dt)
        .collect())
}

/// Residual along one trajectory of `T + 1` samples (`r_k` uses samples `k`
/// and `k + 1`).
pub fn trajectory_residual(i: &[f64], v_p: &[f64], v_s: &[f64], circuit: &CircuitParams, dt: f64) -> Result<Vec<f64>> {
    if i.len() < 2 {
        return Err(SurrogateError::Dimension {
            context: "trajectory residual".into(),
            expected: 2,
            got: i.len(),
        });
    }
    check_len("trajectory residual v_p", i.len(), v_p.len())?;
    check_len("trajectory residual v_s", i.len(), v_s.len())?;
    physics_residual(&i[1..], &i[..i.len() - 1], &v_p[1..], &v_s[1..], circuit, dt)
}

/// Components of a composite loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub data: f64,
    pub physics: f64,
    pub total: f64,
}

/// CirNet loss over `N*T` flattened steps.
pub fn loss_cir(predictions: &[f64], ground_truth: &[f64], residuals: &[f64], lambda_d: f64, lambda_p: f64) -> Result<f64> {
    Ok(loss_cir_parts(predictions, ground_truth, residuals, lambda_d, lambda_p)?.total)
}

pub fn loss_cir_parts(
    predictions: &[f64],
    ground_truth: &[f64],
    residuals: &[f64],
    lambda_d: f64,
    lambda_p: f64,
) -> Result<LossParts> {
    check_weights(lambda_d, lambda_p)?;
    check_len("loss_cir ground truth", predictions.len(), ground_truth.len())?;
    check_len("loss_cir residuals", predictions.len(), residuals.len())?;
    let data = mean_sq(predictions.iter().zip(ground_truth).map(|(a, b)| a - b));
    let physics = mean_sq(residuals.iter().copied());
    Ok(LossParts {
        data,
        physics,
        total: lambda_d * data + lambda_p * physics,
    })
}

/// Samples farther than `edge_window` (circular distance) from every edge.
pub fn sync_mask(len: usize, edges: &[usize], edge_window: usize) -> Vec<bool> {
    (0..len)
        .map(|k| {
            edges.iter().all(|&e| {
                let d = k.abs_diff(e % len);
                d.min(len - d) > edge_window
            })
        })
        .collect()
}

/// A pair of bridge-voltage sequences.
#[derive(Debug, Clone, Copy)]
pub struct VoltagePair<'a> {
    pub p: &'a [f64],
    pub s: &'a [f64],
}

impl VoltagePair<'_> {
    fn len(&self) -> usize {
        self.p.len()
    }
}

/// ModNet loss on one sequence. `edges` are commutation samples of either
/// bridge.
#[allow(clippy::too_many_arguments)]
pub fn modnet_loss(
    predictions: VoltagePair,
    ground_truth: VoltagePair,
    ideal: VoltagePair,
    edges: &[usize],
    edge_window: usize,
    lambda_d: f64,
    lambda_p: f64,
) -> Result<LossParts> {
    check_weights(lambda_d, lambda_p)?;
    let t = predictions.len();
    for (ctx, v) in [
        ("modnet prediction v_s", predictions.s),
        ("modnet truth v_p", ground_truth.p),
        ("modnet truth v_s", ground_truth.s),
        ("modnet ideal v_p", ideal.p),
        ("modnet ideal v_s", ideal.s),
    ] {
        check_len(ctx, t, v.len())?;
    }
    let data = mean_sq(
        (0..t)
            .map(|k| predictions.p[k] - ground_truth.p[k])
            .chain((0..t).map(|k| predictions.s[k] - ground_truth.s[k])),
    );
    let mask = sync_mask(t, edges, edge_window);
    let physics = mean_sq(
        (0..t)
            .filter(|&k| mask[k])
            .flat_map(|k| [predictions.p[k] - ideal.p[k], predictions.s[k] - ideal.s[k]]),
    );
    Ok(LossParts {
        data,
        physics,
        total: lambda_d * data + lambda_p * physics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case() {
        let l = loss_cir(&[0.1, 0.0], &[0.0, 0.0], &[0.0, 0.5], 1.0, 1.0).unwrap();
        assert!((l - 0.13).abs() < 1e-15);
    }

    #[test]
    fn zero_forcing_gives_zero_residual() {
        let c = CircuitParams::default();
        let v_p = [10.0, -20.0, 30.0];
        let v_s = [10.0, -20.0, 30.0];
        let r = physics_residual(&[0.0; 3], &[0.0; 3], &v_p, &v_s, &c, 1e-7).unwrap();
        assert!(r.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn doubling_inductance_doubles_the_first_term() {
        let c = CircuitParams::default();
        let c2 = CircuitParams {
            inductance: 2.0 * c.inductance,
            ..c
        };
        let (next, prev) = ([1.5, -0.25], [0.5, 0.75]);
        let zero = [0.0; 2];
        let a = physics_residual(&next, &prev, &zero, &zero, &c, 1e-7).unwrap();
        let b = physics_residual(&next, &prev, &zero, &zero, &c2, 1e-7).unwrap();
        let a0 = physics_residual(&prev, &prev, &zero, &zero, &c, 1e-7).unwrap();
        for k in 0..2 {
            let first_a = a[k] - a0[k];
            let first_b = b[k] - a0[k];
            assert_eq!(first_b, 2.0 * first_a);
        }
    }

    #[test]
    fn negative_weights_are_rejected() {
        assert!(matches!(loss_cir(&[0.0], &[0.0], &[0.0], -1.0, 1.0), Err(SurrogateError::Domain(_))));
        assert!(loss_cir(&[0.0], &[0.0, 1.0], &[0.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn sync_mask_window() {
        let m = sync_mask(10, &[2], 1);
        assert_eq!(m, vec![true, false, false, false, true, true, true, true, true, true]);
        assert!(sync_mask(10, &[2, 7], 5).iter().all(|x| !x));
        assert!(sync_mask(10, &[], 3).iter().all(|x| *x));
    }

    #[test]
    fn modnet_loss_cases() {
        let ideal_p = [1.0, 1.0, -1.0, -1.0];
        let ideal_s = [0.5, -0.5, -0.5, 0.5];
        let ideal = VoltagePair { p: &ideal_p, s: &ideal_s };
        let l = modnet_loss(ideal, ideal, ideal, &[0, 1, 2, 3], 1, 1.0, 1.0).unwrap();
        assert_eq!(l.total, 0.0);
        let noisy_p = [1.1, 1.0, -1.0, -1.0];
        let noisy = VoltagePair { p: &noisy_p, s: &ideal_s };
        let d = modnet_loss(noisy, ideal, ideal, &[2], 0, 1.0, 0.0).unwrap();
        assert!((d.total - 0.01 / 8.0).abs() < 1e-15);
        let empty = modnet_loss(noisy, ideal, ideal, &[2], 2, 0.0, 1.0).unwrap();
        assert_eq!(empty.physics, 0.0);
    }
}
