//! The trained pair as a performance backend.

use modkit_core::converter::{PhaseShiftTuple, SampledTrace};
use modkit_core::metrics::{report_from_trace, DcLink, PerformanceEvaluator, PerformanceReport};
use modkit_core::sim::{CircuitParams, StateTrace};

use crate::error::Result;
use crate::model::{cirnet_rollout_voltages, periodic_initial_current, SurrogatePair};

/// Runs ModNet and CirNet over one period and measures the predicted trace.
/// The initial current is not known for an unseen command, so it is chosen
/// to make the predicted half-wave antisymmetric, as the steady state is.
#[derive(Debug, Clone)]
pub struct SurrogateEvaluator {
    pub pair: SurrogatePair,
}

impl SurrogateEvaluator {
    pub fn new(pair: SurrogatePair) -> Self {
        Self { pair }
    }

    pub fn trace(&self, circuit: &CircuitParams, link: DcLink, tuple: &PhaseShiftTuple) -> Result<StateTrace> {
        let grid = self.pair.grid(circuit)?;
        let (vp, vs) = self.pair.bridge_voltages(tuple, grid, link)?;
        let norm = &self.pair.normalization;
        let i0 = periodic_initial_current(&self.pair.cirnet, norm, &vp, &vs)?;
        let i = cirnet_rollout_voltages(&self.pair.cirnet, norm, &vp, &vs, i0)?;
        let k_len = grid.samples_per_period;
        Ok(StateTrace {
            i_l: SampledTrace::new(grid, i)?,
            v_c1: SampledTrace::new(grid, vec![link.v1; k_len])?,
            v_c2: SampledTrace::new(grid, vec![link.v2; k_len])?,
            v_p: SampledTrace::new(grid, vp)?,
            v_s: SampledTrace::new(grid, vs)?,
        })
    }
}

impl PerformanceEvaluator for SurrogateEvaluator {
    fn name(&self) -> &str {
        "surrogate"
    }

    fn evaluate(
        &self,
        circuit: &CircuitParams,
        link: DcLink,
        tuple: &PhaseShiftTuple,
    ) -> modkit_core::Result<PerformanceReport> {
        let trace = self
            .trace(circuit, link, tuple)
            .map_err(|e| modkit_core::Error::Backend(e.to_string()))?;
        report_from_trace(&trace, tuple, circuit)
    }
}
