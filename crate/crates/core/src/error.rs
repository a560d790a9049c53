use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("derivative order {0} is not supported (max 3)")]
    InvalidOrder(usize),

    #[error("invalid primitive: {0}")]
    InvalidPrimitive(String),

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("unsupported primitive pair: {0}")]
    UnsupportedPair(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("solver failed after {iterations} iterations (residual {residual:.3e}): {reason}")]
    SolverFailure { reason: String, iterations: usize, residual: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
