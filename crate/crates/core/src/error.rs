use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the clustering library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("degenerate mixture component {component}: proportion {pi:e}")]
    DegenerateComponent { component: usize, pi: f64 },

    #[error("cluster {cluster} is empty")]
    EmptyCluster { cluster: usize },

    #[error("initialization failed: {0}")]
    Init(String),

    #[error("singular moment block for cluster {cluster}, attribute {attribute}")]
    SingularBlock { cluster: usize, attribute: usize },

    #[error("generator gave up after {proposals} centroid proposals for attribute {attribute}")]
    GeneratorTimeout { attribute: usize, proposals: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column {column:?}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

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
