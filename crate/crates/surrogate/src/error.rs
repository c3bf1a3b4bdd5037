use thiserror::Error;

pub type Result<T, E = SurrogateError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("non-finite activation at step {step}")]
    Numeric { step: usize },

    #[error("rollout diverged at step {step}")]
    Rollout { step: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch} ({stage})")]
    Divergence { stage: String, epoch: usize },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Core(#[from] modkit_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
