use thiserror::Error;

/// Failure reported by a [`GraphAccess`](crate::graph::GraphAccess) backend.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AccessError {
    #[error("node index {0} out of range")]
    OutOfRange(usize),
    #[error("transport failure for node {node:?}: {message}")]
    Transport { node: String, message: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("empty graph")]
    EmptyGraph,
    #[error("node index {0} out of range")]
    NodeOutOfRange(usize),
    #[error("unknown node id {0:?}")]
    UnknownNode(String),
    #[error("inconsistent data: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Access(#[from] AccessError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
