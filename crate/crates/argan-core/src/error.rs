//! Crate-wide error type and result alias.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArganError {
    /// Tensor shapes that do not line up; the message carries both shapes.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// Bad configuration file, flag value, or inconsistent hyperparameters.
    #[error("config error: {0}")]
    Config(String),
    /// Dataset/image level problems: missing files, malformed headers, size conflicts.
    #[error("data error: {0}")]
    Data(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// NaN losses, failed self-checks and other numerical breakdowns.
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, ArganError>;
