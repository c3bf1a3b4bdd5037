//! Stacked GRU with layer-normalized gate pre-activations.
//!
//! Per layer, with input `x_t` and previous hidden state `h`:
//!
//! ```text
//! z  = sigmoid(LN_z(W_z x + U_z h + b_z))
//! r  = sigmoid(LN_r(W_r x + U_r h + b_r))
//! n  = tanh(LN_n(W_n x + b_n + r * (U_n h + c_n)))
//! h' = (1 - z) * n + z * h
//! LN(a) = gamma * (a - mean(a)) / sqrt(var(a) + eps) + beta
//! ```
//!
//! The top hidden state goes through an affine readout `y = W_o h + b_o`.
//! Optionally output `j` adds input channel `skip[j]`, so the network
//! predicts a correction to that channel.
//!
//! Flat parameter order, per layer (row-major matrices, `m` = layer input
//! width, `d` = hidden width): `W = [W_z; W_r; W_n]` (3d x m),
//! `U = [U_z; U_r; U_n]` (3d x d), `b_z, b_r, b_n, c_n` (d each), then
//! `gamma_z, beta_z, gamma_r, beta_r, gamma_n, beta_n` (d each). The readout
//! `W_o` (o x d) and `b_o` (o) follow the last layer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SurrogateError};

pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub output_dim: usize,
    /// Input channel added to each output; empty for a plain readout.
    #[serde(default)]
    pub skip: Vec<usize>,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden_dim: usize, layers: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            layers,
            output_dim,
            skip: Vec::new(),
        }
    }

    pub fn with_skip(mut self, skip: Vec<usize>) -> Self {
        self.skip = skip;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.layers == 0 || self.input_dim == 0 || self.output_dim == 0 {
            return Err(SurrogateError::Config(format!(
                "every dimension must be positive: {self:?}"
            )));
        }
        if !self.skip.is_empty() {
            if self.skip.len() != self.output_dim {
                return Err(SurrogateError::Dimension {
                    context: "skip channels".into(),
                    expected: self.output_dim,
                    got: self.skip.len(),
                });
            }
            if let Some(&c) = self.skip.iter().find(|&&c| c >= self.input_dim) {
                return Err(SurrogateError::Config(format!("skip channel {c} is not an input")));
            }
        }
        Ok(())
    }

    fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.hidden_dim
        }
    }

    fn layer_size(&self, l: usize) -> usize {
        let d = self.hidden_dim;
        3 * d * self.layer_input(l) + 3 * d * d + 10 * d
    }

    /// Number of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        (0..self.layers).map(|l| self.layer_size(l)).sum::<usize>()
            + self.output_dim * self.hidden_dim
            + self.output_dim
    }

    fn layer_offset(&self, l: usize) -> usize {
        (0..l).map(|j| self.layer_size(j)).sum()
    }
}

/// Offsets of one layer's blocks inside the flat vector.
#[derive(Debug, Clone, Copy)]
struct LayerIdx {
    m: usize,
    w: usize,
    u: usize,
    b: usize,
    c_n: usize,
    ln: usize,
}

impl LayerIdx {
    fn new(arch: &Architecture, l: usize) -> Self {
        let d = arch.hidden_dim;
        let m = arch.layer_input(l);
        let w = arch.layer_offset(l);
        let u = w + 3 * d * m;
        let b = u + 3 * d * d;
        let c_n = b + 3 * d;
        let ln = c_n + d;
        Self { m, w, u, b, c_n, ln }
    }

    /// gamma / beta of gate `g` (0 = z, 1 = r, 2 = n).
    fn gamma(&self, g: usize, d: usize) -> usize {
        self.ln + 2 * g * d
    }

    fn beta(&self, g: usize, d: usize) -> usize {
        self.ln + (2 * g + 1) * d
    }
}

/// Named parameter blocks, for gradient checks and reporting.
pub fn parameter_blocks(arch: &Architecture) -> Vec<(String, std::ops::Range<usize>)> {
    let d = arch.hidden_dim;
    let mut out = Vec::new();
    for l in 0..arch.layers {
        let ix = LayerIdx::new(arch, l);
        let mut push = |name: &str, start: usize, len: usize| out.push((format!("layer{l}.{name}"), start..start + len));
        for (g, gate) in ["z", "r", "n"].iter().enumerate() {
            push(&format!("W_{gate}"), ix.w + g * d * ix.m, d * ix.m);
        }
        for (g, gate) in ["z", "r", "n"].iter().enumerate() {
            push(&format!("U_{gate}"), ix.u + g * d * d, d * d);
        }
        for (g, gate) in ["z", "r", "n"].iter().enumerate() {
            push(&format!("b_{gate}"), ix.b + g * d, d);
        }
        push("c_n", ix.c_n, d);
        for (g, gate) in ["z", "r", "n"].iter().enumerate() {
            push(&format!("gamma_{gate}"), ix.gamma(g, d), d);
            push(&format!("beta_{gate}"), ix.beta(g, d), d);
        }
    }
    let ro = readout_offset(arch);
    out.push(("readout.W".into(), ro..ro + arch.output_dim * d));
    out.push(("readout.b".into(), ro + arch.output_dim * d..arch.parameter_count()));
    out
}

fn readout_offset(arch: &Architecture) -> usize {
    arch.layer_offset(arch.layers)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceModel {
    pub arch: Architecture,
    pub params: Vec<f64>,
}

/// Hidden state of every layer, plus reusable work buffers.
#[derive(Debug, Clone)]
pub struct State {
    pub h: Vec<Vec<f64>>,
    scratch: Scratch,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    input: Vec<f64>,
    pre: Vec<f64>,
    rec: Vec<f64>,
    zhat: Vec<f64>,
    rhat: Vec<f64>,
    nhat: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    g: Vec<f64>,
    n: Vec<f64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        let v = || vec![0.0; d];
        Self {
            input: Vec::with_capacity(d),
            pre: vec![0.0; 3 * d],
            rec: vec![0.0; 3 * d],
            zhat: v(),
            rhat: v(),
            nhat: v(),
            z: v(),
            r: v(),
            g: v(),
            n: v(),
        }
    }
}

/// Activations of one layer over the whole sequence, stored time-major.
#[derive(Debug, Clone, Default)]
struct LayerCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    zhat: Vec<f64>,
    rhat: Vec<f64>,
    nhat: Vec<f64>,
    inv_std: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    g: Vec<f64>,
}

/// Everything the backward pass needs.
#[derive(Debug, Clone, Default)]
pub struct Cache {
    steps: usize,
    layers: Vec<LayerCache>,
    top: Vec<f64>,
}

impl Cache {
    pub fn steps(&self) -> usize {
        self.steps
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `tanh` through one exponential; faster than the libm routine and exact
/// to a few ulps in absolute terms, which is all the gradients need.
fn tanh(x: f64) -> f64 {
    2.0 * sigmoid(2.0 * x) - 1.0
}

/// Layer norm in place; returns 1/sqrt(var + eps) and leaves the normalized
/// values in `a`.
fn normalize(a: &mut [f64]) -> f64 {
    let d = a.len() as f64;
    let mean = a.iter().sum::<f64>() / d;
    let var = a.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
    let inv = 1.0 / (var + LN_EPS).sqrt();
    for v in a.iter_mut() {
        *v = (*v - mean) * inv;
    }
    inv
}

/// Backward of `y = gamma * xhat + beta`, `xhat = LN(a)`: accumulates the
/// gain/offset gradients and returns dL/da in `dy`.
fn normalize_backward(dy: &mut [f64], xhat: &[f64], inv: f64, gamma: &[f64], dgamma: &mut [f64], dbeta: &mut [f64]) {
    let d = dy.len() as f64;
    let mut mean_dx = 0.0;
    let mut mean_dxx = 0.0;
    for i in 0..dy.len() {
        dgamma[i] += dy[i] * xhat[i];
        dbeta[i] += dy[i];
        dy[i] *= gamma[i];
        mean_dx += dy[i];
        mean_dxx += dy[i] * xhat[i];
    }
    mean_dx /= d;
    mean_dxx /= d;
    for i in 0..dy.len() {
        dy[i] = inv * (dy[i] - mean_dx - xhat[i] * mean_dxx);
    }
}

/// `out += M v` with `M` (rows x cols) row-major.
fn matvec_add(out: &mut [f64], m: &[f64], v: &[f64]) {
    let cols = v.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += dot(row, v);
    }
}

/// Dot product with eight independent partial sums, so the adds pipeline
/// and vectorize.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        let x: &[f64; 8] = x.try_into().unwrap();
        let y: &[f64; 8] = y.try_into().unwrap();
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    ((acc[0] + acc[4]) + (acc[2] + acc[6])) + ((acc[1] + acc[5]) + (acc[3] + acc[7])) + tail
}

/// `out += M^T v`.
fn matvec_t_add(out: &mut [f64], m: &[f64], v: &[f64]) {
    let cols = out.len();
    for (vi, row) in v.iter().zip(m.chunks_exact(cols)) {
        if *vi == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += vi * a;
        }
    }
}

/// `G += u v^T`.
fn outer_add(g: &mut [f64], u: &[f64], v: &[f64]) {
    let cols = v.len();
    for (ui, row) in u.iter().zip(g.chunks_exact_mut(cols)) {
        if *ui == 0.0 {
            continue;
        }
        for (o, b) in row.iter_mut().zip(v) {
            *o += ui * b;
        }
    }
}

impl SequenceModel {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let params = vec![0.0; arch.parameter_count()];
        Ok(Self { arch, params })
    }

    /// Uniform(-1/sqrt(d), 1/sqrt(d)) weights and biases, unit gains, zero
    /// offsets.
    pub fn init(arch: Architecture, rng: &mut impl Rng) -> Result<Self> {
        let mut m = Self::zeros(arch)?;
        let d = m.arch.hidden_dim;
        let bound = 1.0 / (d as f64).sqrt();
        for p in m.params.iter_mut() {
            *p = rng.gen_range(-bound..bound);
        }
        for l in 0..m.arch.layers {
            let ix = LayerIdx::new(&m.arch, l);
            for g in 0..3 {
                m.params[ix.gamma(g, d)..ix.gamma(g, d) + d].fill(1.0);
                m.params[ix.beta(g, d)..ix.beta(g, d) + d].fill(0.0);
            }
        }
        Ok(m)
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.parameter_count() {
            return Err(SurrogateError::Dimension {
                context: "parameter vector".into(),
                expected: arch.parameter_count(),
                got: params.len(),
            });
        }
        Ok(Self { arch, params })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn initial_state(&self) -> State {
        State {
            h: vec![vec![0.0; self.arch.hidden_dim]; self.arch.layers],
            scratch: Scratch::new(self.arch.hidden_dim),
        }
    }

    pub fn new_cache(&self) -> Cache {
        Cache {
            steps: 0,
            layers: vec![LayerCache::default(); self.arch.layers],
            top: Vec::new(),
        }
    }

    /// Advances one step, writing the outputs to `y`. With a cache the
    /// activations are recorded for `backward`.
    pub fn step(&self, state: &mut State, x: &[f64], y: &mut [f64], mut cache: Option<&mut Cache>) -> Result<()> {
        let a = &self.arch;
        if x.len() != a.input_dim || y.len() != a.output_dim {
            return Err(SurrogateError::Dimension {
                context: "lngru step".into(),
                expected: a.input_dim,
                got: x.len(),
            });
        }
        let d = a.hidden_dim;
        let p = &self.params;
        let step_index = cache.as_ref().map_or(0, |c| c.steps);
        let sc = &mut state.scratch;
        sc.input.clear();
        sc.input.extend_from_slice(x);
        for l in 0..a.layers {
            let ix = LayerIdx::new(a, l);
            let h = &mut state.h[l];
            sc.pre.fill(0.0);
            sc.rec.fill(0.0);
            matvec_add(&mut sc.pre, &p[ix.w..ix.w + 3 * d * ix.m], &sc.input);
            matvec_add(&mut sc.rec, &p[ix.u..ix.u + 3 * d * d], h);
            for i in 0..d {
                sc.zhat[i] = sc.pre[i] + sc.rec[i] + p[ix.b + i];
                sc.rhat[i] = sc.pre[d + i] + sc.rec[d + i] + p[ix.b + d + i];
            }
            let inv_z = normalize(&mut sc.zhat);
            let inv_r = normalize(&mut sc.rhat);
            let (gz, bz) = (ix.gamma(0, d), ix.beta(0, d));
            let (gr, br) = (ix.gamma(1, d), ix.beta(1, d));
            let (gn, bn) = (ix.gamma(2, d), ix.beta(2, d));
            for i in 0..d {
                sc.z[i] = sigmoid(p[gz + i] * sc.zhat[i] + p[bz + i]);
                sc.r[i] = sigmoid(p[gr + i] * sc.rhat[i] + p[br + i]);
                sc.g[i] = sc.rec[2 * d + i] + p[ix.c_n + i];
                sc.nhat[i] = sc.pre[2 * d + i] + p[ix.b + 2 * d + i] + sc.r[i] * sc.g[i];
            }
            let inv_n = normalize(&mut sc.nhat);
            for i in 0..d {
                sc.n[i] = tanh(p[gn + i] * sc.nhat[i] + p[bn + i]);
            }
            if let Some(c) = cache.as_deref_mut() {
                let lc = &mut c.layers[l];
                lc.x.extend_from_slice(&sc.input);
                lc.h_prev.extend_from_slice(h);
                lc.zhat.extend_from_slice(&sc.zhat);
                lc.rhat.extend_from_slice(&sc.rhat);
                lc.nhat.extend_from_slice(&sc.nhat);
                lc.inv_std.extend_from_slice(&[inv_z, inv_r, inv_n]);
                lc.z.extend_from_slice(&sc.z);
                lc.r.extend_from_slice(&sc.r);
                lc.n.extend_from_slice(&sc.n);
                lc.g.extend_from_slice(&sc.g);
            }
            for i in 0..d {
                h[i] = (1.0 - sc.z[i]) * sc.n[i] + sc.z[i] * h[i];
            }
            sc.input.clear();
            sc.input.extend_from_slice(h);
        }
        let input = &sc.input;
        let ro = readout_offset(a);
        for (j, yj) in y.iter_mut().enumerate() {
            let w = &p[ro + j * d..ro + (j + 1) * d];
            let mut s = p[ro + a.output_dim * d + j];
            for (wi, hi) in w.iter().zip(input) {
                s += wi * hi;
            }
            if let Some(&c) = a.skip.get(j) {
                s += x[c];
            }
            if !s.is_finite() {
                return Err(SurrogateError::Numeric { step: step_index });
            }
            *yj = s;
        }
        if let Some(c) = cache {
            c.top.extend_from_slice(input);
            c.steps += 1;
        }
        Ok(())
    }

    /// Runs a whole sequence (`inputs` is steps x input_dim, row-major) from
    /// the zero state.
    pub fn forward(&self, inputs: &[f64]) -> Result<(Vec<f64>, Cache)> {
        let m = self.arch.input_dim;
        let o = self.arch.output_dim;
        if inputs.len() % m != 0 {
            return Err(SurrogateError::Dimension {
                context: "forward inputs".into(),
                expected: m,
                got: inputs.len() % m,
            });
        }
        let steps = inputs.len() / m;
        let mut state = self.initial_state();
        let mut cache = self.new_cache();
        let mut out = vec![0.0; steps * o];
        for t in 0..steps {
            self.step(&mut state, &inputs[t * m..(t + 1) * m], &mut out[t * o..(t + 1) * o], Some(&mut cache))?;
        }
        Ok((out, cache))
    }

    /// Gradients of a loss with output gradients `d_out` (steps x output_dim).
    /// Returns (parameter gradient, input gradient).
    pub fn backward(&self, cache: &Cache, d_out: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let d_in = self.backward_into(cache, d_out, &mut grad)?;
        Ok((grad, d_in))
    }

    /// As `backward`, accumulating the parameter gradient into `grad`.
    pub fn backward_into(&self, cache: &Cache, d_out: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
        let a = &self.arch;
        let (d, o, steps) = (a.hidden_dim, a.output_dim, cache.steps);
        if d_out.len() != steps * o {
            return Err(SurrogateError::Dimension {
                context: "output gradient".into(),
                expected: steps * o,
                got: d_out.len(),
            });
        }
        let p = &self.params;
        let ro = readout_offset(a);
        let mut d_in = vec![0.0; steps * a.input_dim];
        // gradient w.r.t. the hidden state carried back from t + 1, per layer
        let mut carry = vec![vec![0.0; d]; a.layers];
        let mut dh = vec![0.0; d];
        let mut dzy = vec![0.0; d];
        let mut dry = vec![0.0; d];
        let mut dny = vec![0.0; d];
        let mut dg = vec![0.0; d];
        for t in (0..steps).rev() {
            let dy = &d_out[t * o..(t + 1) * o];
            let top = &cache.top[t * d..(t + 1) * d];
            dh.fill(0.0);
            for j in 0..o {
                if dy[j] == 0.0 {
                    continue;
                }
                let w = ro + j * d;
                for i in 0..d {
                    grad[w + i] += dy[j] * top[i];
                    dh[i] += dy[j] * p[w + i];
                }
                grad[ro + o * d + j] += dy[j];
                if let Some(&c) = a.skip.get(j) {
                    d_in[t * a.input_dim + c] += dy[j];
                }
            }
            for l in (0..a.layers).rev() {
                let ix = LayerIdx::new(a, l);
                let lc = &cache.layers[l];
                let s = t * d..(t + 1) * d;
                let (z, r, n, g) = (&lc.z[s.clone()], &lc.r[s.clone()], &lc.n[s.clone()], &lc.g[s.clone()]);
                let h_prev = &lc.h_prev[s.clone()];
                let x = &lc.x[t * ix.m..(t + 1) * ix.m];
                let inv = &lc.inv_std[3 * t..3 * t + 3];
                for i in 0..d {
                    dh[i] += carry[l][i];
                }
                let mut dh_prev = vec![0.0; d];
                for i in 0..d {
                    let dn = dh[i] * (1.0 - z[i]);
                    dzy[i] = dh[i] * (h_prev[i] - n[i]) * z[i] * (1.0 - z[i]);
                    dny[i] = dn * (1.0 - n[i] * n[i]);
                    dh_prev[i] = dh[i] * z[i];
                }
                // candidate gate
                {
                    let (gamma, rest) = grad.split_at_mut(ix.beta(2, d));
                    normalize_backward(
                        &mut dny,
                        &lc.nhat[s.clone()],
                        inv[2],
                        &p[ix.gamma(2, d)..ix.gamma(2, d) + d],
                        &mut gamma[ix.gamma(2, d)..ix.gamma(2, d) + d],
                        &mut rest[..d],
                    );
                }
                for i in 0..d {
                    grad[ix.b + 2 * d + i] += dny[i];
                    dg[i] = dny[i] * r[i];
                    grad[ix.c_n + i] += dg[i];
                    dry[i] = dny[i] * g[i] * r[i] * (1.0 - r[i]);
                }
                {
                    let (gamma, rest) = grad.split_at_mut(ix.beta(1, d));
                    normalize_backward(
                        &mut dry,
                        &lc.rhat[s.clone()],
                        inv[1],
                        &p[ix.gamma(1, d)..ix.gamma(1, d) + d],
                        &mut gamma[ix.gamma(1, d)..ix.gamma(1, d) + d],
                        &mut rest[..d],
                    );
                }
                {
                    let (gamma, rest) = grad.split_at_mut(ix.beta(0, d));
                    normalize_backward(
                        &mut dzy,
                        &lc.zhat[s.clone()],
                        inv[0],
                        &p[ix.gamma(0, d)..ix.gamma(0, d) + d],
                        &mut gamma[ix.gamma(0, d)..ix.gamma(0, d) + d],
                        &mut rest[..d],
                    );
                }
                for i in 0..d {
                    grad[ix.b + i] += dzy[i];
                    grad[ix.b + d + i] += dry[i];
                }
                // weight gradients and propagation, gate by gate
                let m = ix.m;
                let mut dx = vec![0.0; m];
                for (gi, da) in [&dzy, &dry, &dny].into_iter().enumerate() {
                    let w = ix.w + gi * d * m;
                    outer_add(&mut grad[w..w + d * m], da, x);
                    matvec_t_add(&mut dx, &p[w..w + d * m], da);
                }
                for (gi, da) in [&dzy, &dry, &dg].into_iter().enumerate() {
                    let u = ix.u + gi * d * d;
                    outer_add(&mut grad[u..u + d * d], da, h_prev);
                    matvec_t_add(&mut dh_prev, &p[u..u + d * d], da);
                }
                carry[l] = dh_prev;
                if l == 0 {
                    for (k, v) in dx.iter().enumerate() {
                        d_in[t * a.input_dim + k] += v;
                    }
                } else {
                    dh.copy_from_slice(&dx);
                }
            }
        }
        Ok(d_in)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parameter_count_of_the_current_network() {
        let arch = Architecture::new(3, 32, 2, 1);
        assert_eq!(arch.parameter_count(), 10_177);
        let blocks = parameter_blocks(&arch);
        assert_eq!(blocks.last().unwrap().1.end, 10_177);
        let total: usize = blocks.iter().map(|(_, r)| r.len()).sum();
        assert_eq!(total, 10_177);
    }

    #[test]
    fn zero_network_outputs_the_readout_bias() {
        let arch = Architecture::new(2, 4, 2, 2);
        let mut m = SequenceModel::zeros(arch).unwrap();
        let n = m.params.len();
        m.params[n - 2] = 0.3;
        m.params[n - 1] = -1.5;
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let (y, _) = m.forward(&x).unwrap();
        for t in 0..10 {
            assert_eq!(y[2 * t], 0.3);
            assert_eq!(y[2 * t + 1], -1.5);
        }
    }

    #[test]
    fn step_and_forward_agree() {
        let arch = Architecture::new(3, 5, 2, 2).with_skip(vec![0, 2]);
        let m = SequenceModel::init(arch, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let (y, cache) = m.forward(&x).unwrap();
        assert_eq!(cache.steps(), 10);
        let mut s = m.initial_state();
        let mut out = [0.0; 2];
        for t in 0..10 {
            m.step(&mut s, &x[3 * t..3 * t + 3], &mut out, None).unwrap();
            assert_eq!(&y[2 * t..2 * t + 2], &out);
        }
    }

    #[test]
    fn non_finite_input_reports_the_step() {
        let arch = Architecture::new(1, 3, 1, 1).with_skip(vec![0]);
        let m = SequenceModel::init(arch, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let x = [0.1, 0.2, f64::NAN, 0.4];
        match m.forward(&x) {
            Err(SurrogateError::Numeric { step }) => assert_eq!(step, 2),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn shape_errors() {
        let m = SequenceModel::zeros(Architecture::new(3, 4, 1, 1)).unwrap();
        assert!(m.forward(&[1.0, 2.0]).is_err());
        assert!(SequenceModel::from_params(Architecture::new(3, 4, 1, 1), vec![0.0; 3]).is_err());
        assert!(Architecture::new(3, 4, 1, 1).with_skip(vec![5]).validate().is_err());
    }
}
