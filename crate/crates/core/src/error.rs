use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too small: {nx}x{ny} (need at least {min} samples per axis)")]
    GridTooSmall { nx: usize, ny: usize, min: usize },

    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),

    #[error("non-finite value at node ({i}, {j})")]
    NonFinite { i: usize, j: usize },

    #[error("boundary condition mismatch: expected {expected}, found {found}")]
    BoundaryMismatch { expected: String, found: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid limit object: {0}")]
    InvalidLimit(String),

    #[error("quadrature did not converge on {context} (estimated error {error:e})")]
    Quadrature { context: String, error: f64 },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
