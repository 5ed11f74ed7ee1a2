use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid sizes, dimension mismatches, bad policy or schedule settings.
    #[error("configuration error: {0}")]
    Config(String),

    /// Labels out of range, empty datasets and similar content problems.
    #[error("data error: {0}")]
    Data(String),

    /// A NaN or infinity appeared where only finite values are allowed.
    #[error("numeric error in {context}: non-finite value")]
    Numeric { context: String },

    /// Malformed IDX input.
    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A broken internal invariant. Reaching this is a bug.
    #[error("internal error: {0}")]
    Internal(String),

    /// A failure inside one simulated run, tagged with where it happened.
    #[error("{location}: {source}")]
    Run {
        location: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn numeric(context: impl Into<String>) -> Self {
        Error::Numeric {
            context: context.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at(self, location: impl Into<String>) -> Self {
        Error::Run {
            location: location.into(),
            source: Box::new(self),
        }
    }

    /// True when the root cause is a configuration problem (CLI exit code 1).
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Run { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
