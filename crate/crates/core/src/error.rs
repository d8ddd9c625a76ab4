use std::path::PathBuf;

use thiserror::Error;

use crate::social::DeviceId;

/// Errors raised by the trust pipeline, the simulator and the file loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown context kind `{0}`")]
    UnknownContext(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("device {0} is not a manager; requests must be routed to the nearest manager")]
    NotAManager(DeviceId),

    #[error("community has no members")]
    EmptyCommunity,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
