use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, layout or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called outside its precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed metrics or Q-table file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The exact solver refused a state space that is too large.
    #[error("refused: {0}")]
    Refused(String),

    #[error("value iteration did not converge after {iterations} sweeps (last delta {delta})")]
    NoConvergence { iterations: usize, delta: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}
