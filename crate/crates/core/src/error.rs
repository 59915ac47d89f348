use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("hop {hop}: {source}")]
    Hop {
        hop: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn shape(expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::Shape {
            expected: expected.into(),
            actual: actual.into(),
        }
    }

    /// Attaches the chain position at which the error surfaced.
    pub fn at_hop(self, hop: usize) -> Self {
        match self {
            already @ Error::Hop { .. } => already,
            other => Error::Hop {
                hop,
                source: Box::new(other),
            },
        }
    }
}
