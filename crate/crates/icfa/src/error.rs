//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported modulation: {0}")]
    UnsupportedModulation(String),

    #[error("enumeration cap exceeded: joint alphabet size {required} > cap {cap}")]
    CapExceeded { required: u128, cap: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown fixture: {0:?}")]
    UnknownFixture(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("infeasible power cascade: {0}")]
    InfeasibleCascade(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("objective evaluation produced a non-finite value: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
