use thiserror::Error;

/// Errors raised by the attention-regression library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("oracle size cap exceeded: n = {n}, d = {d} (cap n <= {max_n}, d <= {max_d})")]
    OracleCap {
        n: usize,
        d: usize,
        max_n: usize,
        max_d: usize,
    },

    #[error("invalid problem instance: {0}")]
    InvalidInstance(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("linear solve failed after {retries} damping retries (last damping {damping:e})")]
    Factorization { retries: usize, damping: f64 },

    #[error("eigensolver diagnostic: {0}")]
    Eigen(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(context: &'static str, expected: impl ToString, got: impl ToString) -> Error {
    Error::Dimension {
        context,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
