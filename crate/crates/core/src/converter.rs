//! Phase-shift modulation of a dual active bridge.
//!
//! Every phase ratio is a fraction of the *half* switching period, so a value
//! of 1 shifts a leg by `T_s / 2`. Bridge legs are named after their upper
//! device: leg A holds S1/S2, leg B S3/S4 (primary), leg C S5/S6 and leg D
//! S7/S8 (secondary).
//!
//! Leg states over one period (half-period units `u`, `t = u * T_s / 2`):
//!
//! ```text
//! q1(u) = high(u)                      50 % square wave, rising at u = 0
//! q3(u) = 1 - high(u - d13)            complement of q1, delayed by d13
//! q5(u) = high(u - d15)
//! q7(u) = 1 - high(u - d15 - d57)
//! s_pri = q1 - q3,  s_sec = q5 - q7    three-level, {-1, 0, +1}
//! ```
//!
//! With `d13 = 0` the primary bridge is a two-level square wave, with
//! `d13 = 1` both legs are aligned and the bridge output vanishes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack, in samples, used when deciding on which side of an edge a sample
/// falls. A sample that coincides with an edge takes the post-edge state.
const EDGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModulationStrategy {
    Sps,
    Dps,
    Eps1,
    Eps2,
    Tps,
    Hybrid,
}

impl ModulationStrategy {
    pub const ALL: [ModulationStrategy; 6] = [
        ModulationStrategy::Sps,
        ModulationStrategy::Dps,
        ModulationStrategy::Eps1,
        ModulationStrategy::Eps2,
        ModulationStrategy::Tps,
        ModulationStrategy::Hybrid,
    ];

    /// Sub-strategies a HYBRID design chooses between.
    pub const HYBRID_CANDIDATES: [ModulationStrategy; 3] = [
        ModulationStrategy::Eps1,
        ModulationStrategy::Eps2,
        ModulationStrategy::Dps,
    ];

    pub fn dof(self) -> usize {
        match self {
            ModulationStrategy::Sps => 1,
            ModulationStrategy::Tps => 3,
            _ => 2,
        }
    }

    /// Names of the entries of a parameter vector, in order.
    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            ModulationStrategy::Sps => &["do"],
            ModulationStrategy::Tps => &["d1", "do", "d2"],
            _ => &["di", "do"],
        }
    }

    /// Position of the outer (bridge-to-bridge) ratio in the parameter vector.
    pub fn outer_index(self) -> usize {
        match self {
            ModulationStrategy::Sps => 0,
            _ => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModulationStrategy::Sps => "SPS",
            ModulationStrategy::Dps => "DPS",
            ModulationStrategy::Eps1 => "EPS1",
            ModulationStrategy::Eps2 => "EPS2",
            ModulationStrategy::Tps => "TPS",
            ModulationStrategy::Hybrid => "HYBRID",
        }
    }
}

impl fmt::Display for ModulationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModulationStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase();
        ModulationStrategy::ALL
            .into_iter()
            .find(|m| m.as_str() == key)
            .ok_or_else(|| Error::InvalidParams(format!("unknown modulation strategy `{s}`")))
    }
}

pub fn strategy_dof(strategy: ModulationStrategy) -> usize {
    strategy.dof()
}

/// Design variables of a strategy, as normalized phase ratios.
///
/// Ordering: SPS `[do]`, TPS `[d1, do, d2]`, every two-DoF strategy `[di, do]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationParams {
    strategy: ModulationStrategy,
    values: Vec<f64>,
}

impl ModulationParams {
    pub fn new(strategy: ModulationStrategy, values: Vec<f64>) -> Result<Self> {
        if values.len() != strategy.dof() {
            return Err(Error::InvalidParams(format!(
                "{strategy} takes {} phase ratios, got {}",
                strategy.dof(),
                values.len()
            )));
        }
        for (name, &v) in strategy.parameter_names().iter().zip(&values) {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::out_of_range(name, v, "[0, 1]"));
            }
        }
        Ok(Self { strategy, values })
    }

    pub fn strategy(&self) -> ModulationStrategy {
        self.strategy
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Re-labels a HYBRID parameter vector as one of its sub-strategies.
    pub fn resolve_hybrid(&self, sub: ModulationStrategy) -> Result<Self> {
        if self.strategy != ModulationStrategy::Hybrid {
            return Ok(self.clone());
        }
        if !ModulationStrategy::HYBRID_CANDIDATES.contains(&sub) {
            return Err(Error::InvalidParams(format!(
                "{sub} is not a hybrid sub-strategy"
            )));
        }
        Self::new(sub, self.values.clone())
    }

    pub fn to_phase_shift_tuple(&self) -> Result<PhaseShiftTuple> {
        let v = &self.values;
        let (d13, d15, d57) = match self.strategy {
            ModulationStrategy::Sps => (0.0, v[0], 0.0),
            ModulationStrategy::Dps => (v[0], v[1], v[0]),
            ModulationStrategy::Eps1 => (v[0], v[1], 0.0),
            ModulationStrategy::Eps2 => (0.0, v[1], v[0]),
            ModulationStrategy::Tps => (v[0], v[1], v[2]),
            ModulationStrategy::Hybrid => {
                return Err(Error::InvalidParams(
                    "HYBRID parameters must be resolved to EPS1, EPS2 or DPS first".into(),
                ))
            }
        };
        PhaseShiftTuple::new(d13, d15, d57)
    }
}

/// Leg-level phase shifts `<S1,S3>`, `<S1,S5>` and `<S5,S7>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseShiftTuple {
    pub d13: f64,
    pub d15: f64,
    pub d57: f64,
}

impl PhaseShiftTuple {
    pub fn new(d13: f64, d15: f64, d57: f64) -> Result<Self> {
        for (name, v) in [("d13", d13), ("d15", d15), ("d57", d57)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::out_of_range(name, v, "[0, 1]"));
            }
        }
        Ok(Self { d13, d15, d57 })
    }

    /// Leg states (q1, q3, q5, q7) at a position given in half periods.
    pub fn leg_states(&self, u: f64) -> [bool; 4] {
        [
            high(u),
            !high(u - self.d13),
            high(u - self.d15),
            !high(u - self.d15 - self.d57),
        ]
    }

    /// (s_pri, s_sec) at a position given in half periods.
    pub fn switching_at(&self, u: f64) -> (f64, f64) {
        let [q1, q3, q5, q7] = self.leg_states(u);
        (level(q1, q3), level(q5, q7))
    }

    /// All eight commutations within one period, sorted by time.
    pub fn commutations(&self, period: f64) -> Vec<Commutation> {
        let half = period / 2.0;
        let mut out = vec![
            (Leg::A, Edge::Rising, 0.0),
            (Leg::A, Edge::Falling, 1.0),
            (Leg::B, Edge::Rising, self.d13 + 1.0),
            (Leg::B, Edge::Falling, self.d13),
            (Leg::C, Edge::Rising, self.d15),
            (Leg::C, Edge::Falling, self.d15 + 1.0),
            (Leg::D, Edge::Rising, self.d15 + self.d57 + 1.0),
            (Leg::D, Edge::Falling, self.d15 + self.d57),
        ]
        .into_iter()
        .map(|(leg, edge, u)| Commutation {
            leg,
            edge,
            time: u.rem_euclid(2.0) * half,
        })
        .collect::<Vec<_>>();
        out.sort_by(|a, b| a.time.total_cmp(&b.time));
        out
    }
}

fn high(u: f64) -> bool {
    u.rem_euclid(2.0) < 1.0
}

fn level(upper_a: bool, upper_b: bool) -> f64 {
    f64::from(u8::from(upper_a)) - f64::from(u8::from(upper_b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Leg {
    A,
    B,
    C,
    D,
}

impl Leg {
    pub fn is_primary(self) -> bool {
        matches!(self, Leg::A | Leg::B)
    }

    /// Name of the upper device of the leg.
    pub fn upper_device(self) -> &'static str {
        match self {
            Leg::A => "S1",
            Leg::B => "S3",
            Leg::C => "S5",
            Leg::D => "S7",
        }
    }
}

/// Transition of the leg's upper device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Edge {
    Rising,
    Falling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Commutation {
    pub leg: Leg,
    pub edge: Edge,
    /// Seconds from the start of the period.
    pub time: f64,
}

/// Uniform sampling of one switching period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub samples_per_period: usize,
    pub period: f64,
}

impl Grid {
    pub fn new(samples_per_period: usize, period: f64) -> Result<Self> {
        if samples_per_period < 8 || samples_per_period % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "samples per period must be even and at least 8, got {samples_per_period}"
            )));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::out_of_range("period", period, "(0, inf)"));
        }
        Ok(Self {
            samples_per_period,
            period,
        })
    }

    pub fn from_frequency(samples_per_period: usize, frequency: f64) -> Result<Self> {
        if !(frequency > 0.0) {
            return Err(Error::out_of_range("switching frequency", frequency, "(0, inf)"));
        }
        Self::new(samples_per_period, 1.0 / frequency)
    }

    pub fn len(&self) -> usize {
        self.samples_per_period
    }

    pub fn is_empty(&self) -> bool {
        self.samples_per_period == 0
    }

    pub fn dt(&self) -> f64 {
        self.period / self.samples_per_period as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.period * k as f64 / self.samples_per_period as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples_per_period).map(|k| self.time(k)).collect()
    }

    /// Sample index of an instant, if it falls on the grid.
    pub fn index_of(&self, time: f64) -> Option<usize> {
        let pos = time / self.dt();
        let k = pos.round();
        if (pos - k).abs() <= 1e-6 {
            Some((k as i64).rem_euclid(self.samples_per_period as i64) as usize)
        } else {
            None
        }
    }

    /// First sample at or after an instant (wrapping at the period end).
    pub fn index_at_or_after(&self, time: f64) -> usize {
        let pos = (time / self.dt() - EDGE_SLACK).ceil();
        (pos as i64).rem_euclid(self.samples_per_period as i64) as usize
    }

    fn same_as(&self, other: &Grid) -> bool {
        self.samples_per_period == other.samples_per_period
            && (self.period - other.period).abs() <= 1e-12 * self.period
    }
}

/// K uniformly spaced samples over one switching period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledTrace {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledTrace {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.samples_per_period {
            return Err(Error::Dimension {
                context: "sampled trace".into(),
                expected: grid.samples_per_period,
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.samples_per_period],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Circular shift: sample `k` of the result is sample `k + shift` of self.
    pub fn rotate(&self, shift: usize) -> Self {
        let mut values = self.values.clone();
        values.rotate_left(shift % self.values.len().max(1));
        Self {
            grid: self.grid,
            values,
        }
    }

    /// Linear interpolation at an arbitrary instant, periodic in the grid.
    pub fn value_at(&self, time: f64) -> f64 {
        let k_len = self.values.len();
        let pos = (time / self.grid.dt()).rem_euclid(k_len as f64);
        let k0 = (pos.floor() as usize).min(k_len - 1);
        let frac = pos - k0 as f64;
        let k1 = (k0 + 1) % k_len;
        self.values[k0] * (1.0 - frac) + self.values[k1] * frac
    }

    pub(crate) fn ensure_same_grid(&self, other: &SampledTrace, context: &str) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::Dimension {
                context: format!("{context}: traces on different grids"),
                expected: self.grid.samples_per_period,
                got: other.grid.samples_per_period,
            });
        }
        Ok(())
    }
}

/// Sampled primary and secondary switching functions.
pub fn switching_functions(tuple: &PhaseShiftTuple, grid: Grid) -> (SampledTrace, SampledTrace) {
    let half = grid.samples_per_period as f64 / 2.0;
    let (pri, sec): (Vec<f64>, Vec<f64>) = (0..grid.samples_per_period)
        .map(|k| tuple.switching_at((k as f64 + EDGE_SLACK) / half))
        .unzip();
    (
        SampledTrace { grid, values: pri },
        SampledTrace { grid, values: sec },
    )
}

/// Ideal bridge terminal voltages for stiff DC links.
pub fn ideal_bridge_voltages(
    tuple: &PhaseShiftTuple,
    v_c1: f64,
    v_c2: f64,
    grid: Grid,
) -> Result<(SampledTrace, SampledTrace)> {
    if !(v_c1 > 0.0) {
        return Err(Error::Domain(format!("v_c1 must be positive, got {v_c1}")));
    }
    if !(v_c2 > 0.0) {
        return Err(Error::Domain(format!("v_c2 must be positive, got {v_c2}")));
    }
    let (s_pri, s_sec) = switching_functions(tuple, grid);
    Ok((s_pri.map(|s| v_c1 * s), s_sec.map(|s| v_c2 * s)))
}

/// Samples at which a trace changes value with respect to its predecessor.
pub fn edge_indices(trace: &SampledTrace) -> Vec<usize> {
    let v = trace.values();
    let k_len = v.len();
    (0..k_len)
        .filter(|&k| v[k] != v[(k + k_len - 1) % k_len])
        .collect()
}

/// Damped ringing that follows each commutation of a bridge voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingingConfig {
    /// Peak ringing relative to the step height.
    pub amplitude_ratio: f64,
    pub frequency: f64,
    pub damping_tau: f64,
    pub enabled: bool,
}

impl Default for RingingConfig {
    fn default() -> Self {
        Self {
            amplitude_ratio: 0.25,
            frequency: 1.0e6,
            damping_tau: 0.4e-6,
            enabled: true,
        }
    }
}

impl RingingConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude_ratio >= 0.0) {
            return Err(Error::out_of_range("amplitude_ratio", self.amplitude_ratio, "[0, inf)"));
        }
        if !(self.frequency > 0.0) {
            return Err(Error::out_of_range("frequency", self.frequency, "(0, inf)"));
        }
        if !(self.damping_tau > 0.0) {
            return Err(Error::out_of_range("damping_tau", self.damping_tau, "(0, inf)"));
        }
        Ok(())
    }

    /// Ringing offset `t` seconds after an edge of unit height.
    pub fn response(&self, t: f64) -> f64 {
        self.amplitude_ratio * (-t / self.damping_tau).exp() * (2.0 * PI * self.frequency * t).sin()
    }
}

/// Adds a damped sinusoid after every listed edge sample. The step height is
/// read from the trace itself (`v[k] - v[k-1]`), and the ringing wraps around
/// the period end because the waveform is periodic.
pub fn inject_nonideality(
    trace: &SampledTrace,
    edges: &[usize],
    cfg: &RingingConfig,
) -> Result<SampledTrace> {
    if !cfg.enabled {
        return Ok(trace.clone());
    }
    cfg.validate()?;
    let k_len = trace.len();
    if let Some(&bad) = edges.iter().find(|&&e| e >= k_len) {
        return Err(Error::Domain(format!("edge index {bad} is off the grid")));
    }
    let dt = trace.grid().dt();
    let span = ((cfg.damping_tau * 1000f64.ln()) / dt).ceil() as usize;
    let src = trace.values();
    let mut out = src.to_vec();
    let mut seen = edges.to_vec();
    seen.sort_unstable();
    seen.dedup();
    for &e in &seen {
        let height = src[e] - src[(e + k_len - 1) % k_len];
        if height == 0.0 {
            continue;
        }
        for j in 0..=span {
            out[(e + j) % k_len] += height * cfg.response(j as f64 * dt);
        }
    }
    SampledTrace::new(trace.grid(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::from_frequency(200, 100e3).unwrap()
    }

    #[test]
    fn dof_matches_table() {
        assert_eq!(strategy_dof(ModulationStrategy::Tps), 3);
        assert_eq!(strategy_dof(ModulationStrategy::Sps), 1);
        assert_eq!(strategy_dof(ModulationStrategy::Hybrid), 2);
        assert_eq!(strategy_dof(ModulationStrategy::Dps), 2);
        assert_eq!(strategy_dof(ModulationStrategy::Eps1), 2);
        assert_eq!(strategy_dof(ModulationStrategy::Eps2), 2);
    }

    #[test]
    fn tuple_mapping_examples() {
        let t = ModulationParams::new(ModulationStrategy::Sps, vec![0.3])
            .unwrap()
            .to_phase_shift_tuple()
            .unwrap();
        assert_eq!((t.d13, t.d15, t.d57), (0.0, 0.3, 0.0));
        let t = ModulationParams::new(ModulationStrategy::Dps, vec![0.1, 0.3])
            .unwrap()
            .to_phase_shift_tuple()
            .unwrap();
        assert_eq!((t.d13, t.d15, t.d57), (0.1, 0.3, 0.1));
        let t = ModulationParams::new(ModulationStrategy::Tps, vec![0.2, 0.25, 0.1])
            .unwrap()
            .to_phase_shift_tuple()
            .unwrap();
        assert_eq!((t.d13, t.d15, t.d57), (0.2, 0.25, 0.1));
    }

    #[test]
    fn tuple_mapping_exhaustive_grid() {
        let steps: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        for &a in &steps {
            for &b in &steps {
                let eps1 = ModulationParams::new(ModulationStrategy::Eps1, vec![a, b])
                    .unwrap()
                    .to_phase_shift_tuple()
                    .unwrap();
                assert_eq!((eps1.d13, eps1.d15, eps1.d57), (a, b, 0.0));
                let eps2 = ModulationParams::new(ModulationStrategy::Eps2, vec![a, b])
                    .unwrap()
                    .to_phase_shift_tuple()
                    .unwrap();
                assert_eq!((eps2.d13, eps2.d15, eps2.d57), (0.0, b, a));
                let dps = ModulationParams::new(ModulationStrategy::Dps, vec![a, b])
                    .unwrap()
                    .to_phase_shift_tuple()
                    .unwrap();
                assert_eq!((dps.d13, dps.d15, dps.d57), (a, b, a));
                for &c in &steps {
                    let tps = ModulationParams::new(ModulationStrategy::Tps, vec![a, b, c])
                        .unwrap()
                        .to_phase_shift_tuple()
                        .unwrap();
                    assert_eq!((tps.d13, tps.d15, tps.d57), (a, b, c));
                }
            }
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(matches!(
            ModulationParams::new(ModulationStrategy::Tps, vec![0.1, 0.2]),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            ModulationParams::new(ModulationStrategy::Sps, vec![1.2]),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            ModulationParams::new(ModulationStrategy::Dps, vec![-0.1, 0.2]),
            Err(Error::OutOfRange { .. })
        ));
        let hybrid = ModulationParams::new(ModulationStrategy::Hybrid, vec![0.1, 0.2]).unwrap();
        assert!(hybrid.to_phase_shift_tuple().is_err());
        let eps2 = hybrid.resolve_hybrid(ModulationStrategy::Eps2).unwrap();
        assert_eq!(eps2.to_phase_shift_tuple().unwrap().d57, 0.1);
        assert!(hybrid.resolve_hybrid(ModulationStrategy::Tps).is_err());
    }

    #[test]
    fn strategy_parse_roundtrip() {
        for s in ModulationStrategy::ALL {
            assert_eq!(s.as_str().parse::<ModulationStrategy>().unwrap(), s);
        }
        assert_eq!("tps".parse::<ModulationStrategy>().unwrap(), ModulationStrategy::Tps);
        assert!("XYZ".parse::<ModulationStrategy>().is_err());
    }

    #[test]
    fn zero_inner_shift_is_two_level() {
        let t = PhaseShiftTuple::new(0.0, 0.3, 0.0).unwrap();
        let (p, s) = switching_functions(&t, grid());
        assert!(p.values().iter().all(|v| v.abs() == 1.0));
        assert!(s.values().iter().all(|v| v.abs() == 1.0));
    }

    #[test]
    fn full_inner_shift_cancels_bridge() {
        let t = PhaseShiftTuple::new(1.0, 0.3, 1.0).unwrap();
        let (p, s) = switching_functions(&t, grid());
        assert!(p.values().iter().all(|&v| v == 0.0));
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_dwell_fraction_tracks_inner_shift() {
        let g = grid();
        // each of the two zero windows may gain or lose one sample when the
        // shift is not sample-aligned
        for (d, slack) in [(0.4, 1.0), (0.25, 1.0), (0.123, 2.0), (0.77, 2.0)] {
            let t = PhaseShiftTuple::new(d, 0.0, 0.0).unwrap();
            let (p, _) = switching_functions(&t, g);
            let zeros = p.values().iter().filter(|&&v| v == 0.0).count() as f64;
            let frac = zeros / g.len() as f64;
            assert!((frac - d).abs() <= slack / g.len() as f64 + 1e-12, "d={d} frac={frac}");
        }
    }

    #[test]
    fn switching_is_zero_mean_and_half_wave_antisymmetric() {
        let g = grid();
        let half = g.len() / 2;
        for (a, b, c) in [(0.13, 0.37, 0.61), (0.0, 0.9, 0.05), (0.5, 0.5, 0.5)] {
            let t = PhaseShiftTuple::new(a, b, c).unwrap();
            let (p, s) = switching_functions(&t, g);
            assert!(p.mean().abs() <= 1.0 / g.len() as f64);
            assert!(s.mean().abs() <= 1.0 / g.len() as f64);
            for k in 0..half {
                assert_eq!(p.values()[k + half], -p.values()[k]);
                assert_eq!(s.values()[k + half], -s.values()[k]);
            }
        }
    }

    #[test]
    fn bridge_voltage_amplitudes() {
        let t = PhaseShiftTuple::new(0.2, 0.3, 0.4).unwrap();
        let (vp, vs) = ideal_bridge_voltages(&t, 200.0, 160.0, grid()).unwrap();
        assert_eq!(vp.values().iter().fold(0.0f64, |m, v| m.max(v.abs())), 200.0);
        assert_eq!(vs.values().iter().fold(0.0f64, |m, v| m.max(v.abs())), 160.0);
        assert!(ideal_bridge_voltages(&t, 0.0, 160.0, grid()).is_err());
        assert!(ideal_bridge_voltages(&t, 200.0, -1.0, grid()).is_err());
    }

    #[test]
    fn zero_tuple_gives_identical_normalized_bridges() {
        let t = PhaseShiftTuple::new(0.0, 0.0, 0.0).unwrap();
        let (vp, vs) = ideal_bridge_voltages(&t, 200.0, 160.0, grid()).unwrap();
        for (a, b) in vp.values().iter().zip(vs.values()) {
            assert_eq!(a / 200.0, b / 160.0);
        }
    }

    #[test]
    fn commutation_times_match_sampled_edges() {
        let g = grid();
        let t = PhaseShiftTuple::new(0.2, 0.3, 0.1).unwrap();
        let (p, s) = switching_functions(&t, g);
        let comms = t.commutations(g.period);
        assert_eq!(comms.len(), 8);
        let mut from_comms: Vec<usize> = comms
            .iter()
            .map(|c| g.index_at_or_after(c.time))
            .collect();
        from_comms.sort_unstable();
        let mut edges = edge_indices(&p);
        edges.extend(edge_indices(&s));
        edges.sort_unstable();
        assert_eq!(from_comms, edges);
    }

    #[test]
    fn ringing_zero_amplitude_and_disabled_are_identity() {
        let t = PhaseShiftTuple::new(0.2, 0.3, 0.1).unwrap();
        let (vp, _) = ideal_bridge_voltages(&t, 200.0, 160.0, grid()).unwrap();
        let edges = edge_indices(&vp);
        let zero = RingingConfig {
            amplitude_ratio: 0.0,
            ..RingingConfig::default()
        };
        assert_eq!(inject_nonideality(&vp, &edges, &zero).unwrap(), vp);
        let off = RingingConfig::disabled();
        let out = inject_nonideality(&vp, &edges, &off).unwrap();
        assert!(out
            .values()
            .iter()
            .zip(vp.values())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn single_edge_ringing_bounded_and_decaying() {
        // A step of 400 V at sample 10 on an otherwise flat trace.
        let g = grid();
        let mut values = vec![-200.0; g.len()];
        for v in values.iter_mut().skip(10) {
            *v = 200.0;
        }
        let trace = SampledTrace::new(g, values.clone()).unwrap();
        let cfg = RingingConfig {
            amplitude_ratio: 0.2,
            frequency: 1.0e6,
            damping_tau: 0.4e-6,
            enabled: true,
        };
        let out = inject_nonideality(&trace, &[10], &cfg).unwrap();
        let dev: Vec<f64> = out
            .values()
            .iter()
            .zip(&values)
            .map(|(a, b)| a - b)
            .collect();
        assert_eq!(dev[10], 0.0);
        assert!(dev[11].abs() <= 80.0);
        assert!(dev[11].abs() > 0.0);
        // envelope 80 exp(-t/tau) strictly decays
        let env: Vec<f64> = (0..40)
            .map(|j| 400.0 * 0.2 * (-(j as f64) * g.dt() / cfg.damping_tau).exp())
            .collect();
        for j in 1..40 {
            assert!(env[j] < env[j - 1]);
            assert!(dev[10 + j].abs() <= env[j] + 1e-12);
        }
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(6, 1e-5).is_err());
        assert!(Grid::new(201, 1e-5).is_err());
        assert!(Grid::new(200, 0.0).is_err());
        let g = grid();
        assert!((g.dt() * g.len() as f64 - g.period).abs() <= 1e-12 * g.period);
        assert_eq!(g.index_of(g.time(17)), Some(17));
        assert_eq!(g.index_of(g.time(17) + 0.3 * g.dt()), None);
    }
}
