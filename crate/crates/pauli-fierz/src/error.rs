//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by builders, solvers, and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or invalid arguments to a builder.
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterative solver failed to reach its tolerance.
    #[error("solver failure: {0}")]
    Solver(String),

    /// A requested computation exceeds the configured memory budget.
    #[error("dimension budget exceeded: {0}")]
    Dimension(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }

    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
