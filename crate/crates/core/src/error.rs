use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{message} at line {line}")]
    Parse { line: usize, message: String },

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("non-finite entry in numeric input")]
    NumericInput,

    #[error("matrix is not positive definite (pivot {pivot:e} at column {column})")]
    NotSpd { column: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("vertex {0} is already fixed")]
    AlreadyFixed(usize),

    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("protocol error: {0}")]
    Protocol(String),
}
