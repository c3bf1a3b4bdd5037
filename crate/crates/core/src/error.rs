use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("value out of range: {field} = {value} (allowed {allowed})")]
    OutOfRange {
        field: String,
        value: f64,
        allowed: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("no convergence after {cycles} cycles (final residual {residual:.3e})")]
    Convergence { cycles: usize, residual: f64 },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("infeasible design: {message}")]
    Infeasible { message: String, power_error: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("backend failure: {0}")]
    Backend(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn out_of_range(field: &str, value: f64, allowed: &str) -> Self {
        Error::OutOfRange {
            field: field.to_string(),
            value,
            allowed: allowed.to_string(),
        }
    }
}
