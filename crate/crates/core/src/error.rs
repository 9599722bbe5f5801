//! Error taxonomy shared by the whole toolkit.
//!
//! The CLI maps each variant class to a distinct exit code, so the split
//! mirrors the user-facing failure modes: bad inputs/config, sizing that
//! cannot be realized, numeric trouble, and plain I/O.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Mathematically invalid input (out-of-domain argument, violated
    /// precondition).
    #[error("domain error: {0}")]
    Domain(String),

    /// Solver non-convergence or other numerical failure.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A sizing request that cannot be realized in the technology.
    #[error("sizing error: {0}")]
    Sizing(String),

    /// Invalid configuration: missing parameters, schema violations,
    /// inconsistent requests.
    #[error("config error: {0}")]
    Config(String),

    /// File parse failure with location context.
    #[error("parse error in {file}: {message}")]
    Parse { file: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
    pub fn sizing(msg: impl Into<String>) -> Self {
        Error::Sizing(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn parse(file: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            message: message.into(),
        }
    }
}
