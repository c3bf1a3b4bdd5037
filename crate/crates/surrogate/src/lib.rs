//! Hierarchical recurrent surrogate of a dual active bridge.
//!
//! ModNet predicts the bridge terminal voltages (ringing included) from the
//! commanded switching pattern; CirNet integrates the inductor current from
//! those voltages. Both are stacked layer-normalized GRUs with hand-written
//! backpropagation, trained on a loss that mixes data error with the
//! inductor-equation residual.

pub mod checkpoint;
pub mod error;
pub mod eval;
pub mod evaluator;
pub mod lngru;
pub mod losses;
pub mod model;
pub mod norm;
pub mod train;

pub use checkpoint::Checkpoint;
pub use error::{Result, SurrogateError};
pub use evaluator::SurrogateEvaluator;
pub use lngru::{Architecture, SequenceModel};
pub use model::SurrogatePair;
pub use norm::{Normalization, Scaler};
pub use train::{train, History, TrainConfig};
