use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument or parameter fell outside its valid domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A computation produced an impossible or non-finite quantity.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed input data, with the offending line when known.
    #[error("{}: line {line}: {message}", path.display())]
    Data {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{}: {message}", path.display())]
    Input { path: PathBuf, message: String },

    #[error("I/O error on {}: {source}", path.display())]
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

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach the MCMC iteration at which a failure surfaced.
    pub fn at_iteration(self, iteration: usize) -> Self {
        match self {
            Error::Numerical(m) => Error::Numerical(format!("iteration {iteration}: {m}")),
            Error::Domain(m) => Error::Domain(format!("iteration {iteration}: {m}")),
            other => other,
        }
    }

    /// True for failures that should be reported as numerical (CLI exit code 3).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}
