use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs of an operation was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// Malformed file contents, with the byte offset where parsing stopped.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    /// A frame of a dataset failed to load.
    #[error("frame {id}: {source}")]
    Frame {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// An internal consistency check failed; this is a bug, not bad input.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_frame(self, id: &str) -> Self {
        Error::Frame {
            id: id.to_string(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by the data handed to the library (as opposed
    /// to internal invariant failures).
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Invariant(_) => false,
            Error::Frame { source, .. } => source.is_data_error(),
            _ => true,
        }
    }
}
