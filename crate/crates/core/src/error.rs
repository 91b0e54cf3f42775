use thiserror::Error;

pub type Result<T> = std::result::Result<T, PceError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PceError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point outside the support of marginal {dim}: {value}")]
    Domain { dim: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("regression matrix is rank deficient at active column {column}")]
    Singular { column: usize },

    #[error("degenerate leverage {leverage} at row {row}")]
    DegenerateLeverage { row: usize, leverage: f64 },

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("unsupported input model: {0}")]
    Unsupported(String),

    #[error("rejection sampler acceptance rate {rate:e} after {proposals} proposals")]
    AcceptanceRate { rate: f64, proposals: u64 },

    #[error("model evaluation failed: {0}")]
    Model(String),
}
