//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid scenario, geometry, or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Matrix/vector dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A block subproblem of the alternating optimization failed.
    #[error("{block} subproblem failed: {detail}")]
    Subproblem {
        block: &'static str,
        detail: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Config file could not be parsed.
    #[error("config parse error: {0}")]
    Parse(String),
}

pub type Result<X> = std::result::Result<X, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn subproblem(block: &'static str, detail: impl Into<String>) -> Self {
        Error::Subproblem {
            block,
            detail: detail.into(),
        }
    }
}
