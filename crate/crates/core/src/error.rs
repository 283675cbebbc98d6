use thiserror::Error;

/// Errors produced by the solvers, generators and the experiment harness.
#[derive(Debug, Error)]
pub enum AssdError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate pivot: column {index} has norm {norm:.3e}, below floor {floor:.3e}")]
    DegeneratePivot { index: usize, norm: f64, floor: f64 },

    #[error("decimation dead end: all remaining active columns are degenerate")]
    DeadEnd,

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AssdError>;
