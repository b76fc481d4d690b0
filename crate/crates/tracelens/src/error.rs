use std::path::PathBuf;

use tracelens_core::analysis::ReplayError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: invalid dataset: {msg}")]
    Dataset { path: PathBuf, msg: String },
    #[error("{path}:{line}: {source}")]
    Replay {
        path: PathBuf,
        line: usize,
        #[source]
        source: ReplayError,
    },
    #[error("datasets unavailable: {0}")]
    Unavailable(String),
    #[error(transparent)]
    Core(#[from] tracelens_core::Error),
    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    /// Whether the error comes from malformed input files.
    pub fn is_parse(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Dataset { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
