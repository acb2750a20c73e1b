use thiserror::Error;

/// Errors surfaced by lattice, channel, density and experiment operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("domain mismatch: expected {expected:?}, got {got:?}")]
    DomainMismatch { expected: crate::grid::Domain, got: crate::grid::Domain },

    #[error("cannot normalize a zero vector")]
    ZeroNorm,

    #[error("state is not normalized: |norm - 1| = {deviation:.3e}")]
    NotNormalized { deviation: f64 },

    #[error("point {point:?} is not on the {domain:?} grid (axis {axis})")]
    OffGrid { point: Vec<f64>, domain: crate::grid::Domain, axis: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("sample too small: need at least {min}, got {got}")]
    SampleTooSmall { min: usize, got: usize },

    #[error("times must be sorted, within [0, 1] and nonnegative")]
    InvalidTimes,

    #[error("invalid config ({field}): {message}")]
    InvalidConfig { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig { field: field.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
