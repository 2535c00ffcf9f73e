use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the estimation engine.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical evaluation produced a non-finite value.
    #[error("numerical error at coordinate {index}: {message}")]
    Numerical { index: usize, message: String },

    /// The sampler could not start from the supplied initial point.
    #[error("initialization error: {0}")]
    Init(String),

    /// The sampling design cannot be realised (e.g. too many certainty units).
    #[error("design error: {0}")]
    Design(String),

    /// A Monte Carlo study had too many failed replicates.
    #[error("study error: {failed} of {total} replicates failed")]
    Study { failed: usize, total: usize },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
