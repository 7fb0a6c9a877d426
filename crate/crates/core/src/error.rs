use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::harness::HarnessError;
use crate::heterogeneity::HeterogeneityError;
use crate::pipeline::ConfigError;
use crate::reliability::RubricError;
use crate::retrieval::RetrievalError;
use crate::stance::StanceError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure of an external stance or similarity provider.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("provider timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("malformed provider reply: {0}")]
    Malformed(String),
}

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data or configuration.
    Input,
    /// Filesystem or provider failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Rubric(#[from] RubricError),
    #[error(transparent)]
    Stance(#[from] StanceError),
    #[error(transparent)]
    Heterogeneity(#[from] HeterogeneityError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("query {query_id}: {source}")]
    Query {
        query_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } | Error::Provider(_) => ErrorKind::Io,
            Error::Corpus(CorpusError::Io { .. }) => ErrorKind::Io,
            Error::Retrieval(RetrievalError::Io { .. }) => ErrorKind::Io,
            Error::Rubric(RubricError::Io { .. }) => ErrorKind::Io,
            Error::Query { source, .. } => source.kind(),
            _ => ErrorKind::Input,
        }
    }
}
