use thiserror::Error;

/// Errors raised by the measurement primitives.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("search exhausted after {attempts} attempts")]
    Exhausted { attempts: u64 },
    #[error("missing capability: {0}")]
    Capability(&'static str),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("unknown entry: {0}")]
    Lookup(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
