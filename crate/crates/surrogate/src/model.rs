//! The two stacked networks and their autoregressive rollouts.
//!
//! ModNet, per step `k`: inputs `[v_p(k-1), v_s(k-1), ideal_p(k), ideal_s(k)]`,
//! outputs `[v_p(k), v_s(k)]`. The commanded ideal bridge voltages are fed
//! as exogenous inputs because the previous voltages alone cannot tell two
//! modulation commands apart.
//!
//! CirNet, per step `k`: inputs `[i(k), v_p(k), v_s(k)]`, output `i(k+1)`.
//! The voltage sample `k` is the value held on `[t_k, t_{k+1})`.
//!
//! Every channel is z-scored with the training-split scalers; ideal and
//! predicted voltages share the scaler of the measured channel.

use modkit_core::converter::{ideal_bridge_voltages, Grid, PhaseShiftTuple};
use modkit_core::metrics::DcLink;
use modkit_core::sim::CircuitParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SurrogateError};
use crate::lngru::{Architecture, SequenceModel};
use crate::norm::Normalization;

pub const MODNET_INPUTS: usize = 4;
pub const CIRNET_INPUTS: usize = 3;

/// ModNet architecture; outputs add the ideal voltage channels when
/// `residual` is set, so the network learns the deviation from ideal.
pub fn modnet_architecture(hidden_dim: usize, layers: usize, residual: bool) -> Architecture {
    let a = Architecture::new(MODNET_INPUTS, hidden_dim, layers, 2);
    if residual {
        a.with_skip(vec![2, 3])
    } else {
        a
    }
}

/// CirNet architecture; with `residual` the network predicts the increment
/// of the current.
pub fn cirnet_architecture(hidden_dim: usize, layers: usize, residual: bool) -> Architecture {
    let a = Architecture::new(CIRNET_INPUTS, hidden_dim, layers, 1);
    if residual {
        a.with_skip(vec![0])
    } else {
        a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogatePair {
    pub modnet: SequenceModel,
    pub cirnet: SequenceModel,
    pub normalization: Normalization,
    /// When false CirNet is driven by the ideal bridge voltages and ModNet
    /// is unused.
    pub hierarchical: bool,
    pub samples_per_period: usize,
}

fn rollout_error(e: SurrogateError) -> SurrogateError {
    match e {
        SurrogateError::Numeric { step } => SurrogateError::Rollout { step },
        other => other,
    }
}

impl SurrogatePair {
    /// Freshly initialized pair, deterministic in `seed`.
    pub fn init(
        hidden_dim: usize,
        layers: usize,
        residual: bool,
        normalization: Normalization,
        samples_per_period: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modnet = SequenceModel::init(modnet_architecture(hidden_dim, layers, residual), &mut rng)?;
        let cirnet = SequenceModel::init(cirnet_architecture(hidden_dim, layers, residual), &mut rng)?;
        Self::new(modnet, cirnet, normalization, true, samples_per_period)
    }

    pub fn new(
        modnet: SequenceModel,
        cirnet: SequenceModel,
        normalization: Normalization,
        hierarchical: bool,
        samples_per_period: usize,
    ) -> Result<Self> {
        let check = |ctx: &str, expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(SurrogateError::Dimension {
                    context: ctx.into(),
                    expected,
                    got,
                })
            }
        };
        check("modnet inputs", MODNET_INPUTS, modnet.arch.input_dim)?;
        check("modnet outputs", 2, modnet.arch.output_dim)?;
        check("cirnet inputs", CIRNET_INPUTS, cirnet.arch.input_dim)?;
        check("cirnet outputs", 1, cirnet.arch.output_dim)?;
        if samples_per_period < 8 || samples_per_period % 2 != 0 {
            return Err(SurrogateError::Config(format!(
                "samples per period must be even and at least 8, got {samples_per_period}"
            )));
        }
        Ok(Self {
            modnet,
            cirnet,
            normalization,
            hierarchical,
            samples_per_period,
        })
    }

    pub fn grid(&self, circuit: &CircuitParams) -> Result<Grid> {
        Ok(circuit.grid(self.samples_per_period)?)
    }

    /// Bridge voltages seen by CirNet for a command at the given DC links:
    /// the ModNet rollout, or the ideal waveforms for a CirNet-only pair.
    pub fn bridge_voltages(&self, tuple: &PhaseShiftTuple, grid: Grid, link: DcLink) -> Result<(Vec<f64>, Vec<f64>)> {
        let (ip, is) = ideal_bridge_voltages(tuple, link.v1, link.v2, grid)?;
        let (ip, is) = (ip.into_values(), is.into_values());
        if !self.hierarchical {
            return Ok((ip, is));
        }
        let v0 = (ip[ip.len() - 1], is[is.len() - 1]);
        modnet_rollout_ideal(&self.modnet, &self.normalization, &ip, &is, v0)
    }

    /// ModNet rollout for a command; `v0` is the pair preceding sample 0.
    pub fn modnet_rollout(
        &self,
        tuple: &PhaseShiftTuple,
        grid: Grid,
        link: DcLink,
        v0: (f64, f64),
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let (ip, is) = ideal_bridge_voltages(tuple, link.v1, link.v2, grid)?;
        modnet_rollout_ideal(&self.modnet, &self.normalization, ip.values(), is.values(), v0)
    }

    /// Inductor-current rollout over one period starting from `i0`.
    pub fn cirnet_rollout(&self, tuple: &PhaseShiftTuple, grid: Grid, link: DcLink, i0: f64) -> Result<Vec<f64>> {
        let (vp, vs) = self.bridge_voltages(tuple, grid, link)?;
        cirnet_rollout_voltages(&self.cirnet, &self.normalization, &vp, &vs, i0)
    }
}

/// ModNet rollout driven by given ideal waveforms (volts in, volts out).
pub fn modnet_rollout_ideal(
    modnet: &SequenceModel,
    norm: &Normalization,
    ideal_p: &[f64],
    ideal_s: &[f64],
    v0: (f64, f64),
) -> Result<(Vec<f64>, Vec<f64>)> {
    if ideal_p.len() != ideal_s.len() {
        return Err(SurrogateError::Dimension {
            context: "modnet rollout".into(),
            expected: ideal_p.len(),
            got: ideal_s.len(),
        });
    }
    let mut state = modnet.initial_state();
    let mut prev = [norm.v_p.normalize(v0.0), norm.v_s.normalize(v0.1)];
    let mut y = [0.0; 2];
    let mut vp = Vec::with_capacity(ideal_p.len());
    let mut vs = Vec::with_capacity(ideal_p.len());
    for k in 0..ideal_p.len() {
        let x = [prev[0], prev[1], norm.v_p.normalize(ideal_p[k]), norm.v_s.normalize(ideal_s[k])];
        modnet.step(&mut state, &x, &mut y, None).map_err(|_| SurrogateError::Rollout { step: k })?;
        vp.push(norm.v_p.denormalize(y[0]));
        vs.push(norm.v_s.denormalize(y[1]));
        prev = y;
    }
    Ok((vp, vs))
}

/// CirNet rollout driven by given bridge voltages; element 0 is `i0`.
pub fn cirnet_rollout_voltages(
    cirnet: &SequenceModel,
    norm: &Normalization,
    v_p: &[f64],
    v_s: &[f64],
    i0: f64,
) -> Result<Vec<f64>> {
    Ok(cirnet_rollout_full(cirnet, norm, v_p, v_s, i0)?.0)
}

/// As `cirnet_rollout_voltages`, also returning the prediction after the
/// last sample (the state one period on).
pub(crate) fn cirnet_rollout_full(
    cirnet: &SequenceModel,
    norm: &Normalization,
    v_p: &[f64],
    v_s: &[f64],
    i0: f64,
) -> Result<(Vec<f64>, f64)> {
    if v_p.len() != v_s.len() || v_p.is_empty() {
        return Err(SurrogateError::Dimension {
            context: "cirnet rollout".into(),
            expected: v_p.len(),
            got: v_s.len(),
        });
    }
    let mut state = cirnet.initial_state();
    let mut i = norm.i_l.normalize(i0);
    let mut out = Vec::with_capacity(v_p.len());
    let mut y = [0.0];
    for k in 0..v_p.len() {
        out.push(norm.i_l.denormalize(i));
        let x = [i, norm.v_p.normalize(v_p[k]), norm.v_s.normalize(v_s[k])];
        cirnet.step(&mut state, &x, &mut y, None).map_err(rollout_error)?;
        i = y[0];
    }
    Ok((out, norm.i_l.denormalize(i)))
}

/// Initial current of the periodic steady state, found from half-wave
/// antisymmetry `i(T/2) = -i(0)` with a few secant steps on the rollout.
pub fn periodic_initial_current(cirnet: &SequenceModel, norm: &Normalization, v_p: &[f64], v_s: &[f64]) -> Result<f64> {
    let half = v_p.len() / 2;
    let g = |i0: f64| -> Result<f64> {
        let (_, end) = cirnet_rollout_full(cirnet, norm, &v_p[..half], &v_s[..half], i0)?;
        Ok(end + i0)
    };
    let mut x0 = 0.0;
    let mut x1 = norm.i_l.std.max(1e-3);
    let mut f0 = g(x0)?;
    let mut f1 = g(x1)?;
    for _ in 0..8 {
        let den = f1 - f0;
        if den == 0.0 || !den.is_finite() {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / den;
        (x0, f0) = (x1, f1);
        x1 = x2;
        f1 = g(x1)?;
        if f1.abs() <= 1e-9 * (1.0 + x1.abs()) {
            break;
        }
    }
    Ok(x1)
}
