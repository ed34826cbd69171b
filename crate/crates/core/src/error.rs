use thiserror::Error;

/// Errors raised across the simulation and verification toolkit.
#[derive(Debug, Error)]
pub enum OfbmError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("quadrature accuracy not reached: estimated error {estimate:.3e} exceeds {tolerance:.3e} after {panels} panels")]
    Accuracy {
        estimate: f64,
        tolerance: f64,
        panels: usize,
    },

    #[error("capacity exceeded: {requested} values requested, limit is {limit}")]
    Capacity { requested: usize, limit: usize },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, OfbmError>;
