//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value violated an operation's domain (nonpositive intensity,
    /// out-of-range parameter, shape mismatch).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration file or constant is unusable (singular extinction
    /// table, infeasible filter spec, unknown scenario).
    #[error("configuration error: {0}")]
    Config(String),

    /// Linear algebra broke down (non-positive-definite covariance,
    /// untrainable fold).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The study protocol was violated (online block without a model,
    /// label counts off-plan).
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Layout or dataset validation failed; lists every violation found.
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
