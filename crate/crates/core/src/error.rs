use thiserror::Error;

/// Errors raised across the training stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Tensor shapes are incompatible for the requested operation.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// An input lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller violated an operation precondition.
    #[error("contract error: {0}")]
    Contract(String),

    /// A configuration value is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// Layout generation gave up after repeated failures.
    #[error("generation error: {0}")]
    Generation(String),

    /// A checkpoint could not be read or written.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! contract {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Contract(format!($($arg)+)));
        }
    };
}
pub(crate) use contract;
