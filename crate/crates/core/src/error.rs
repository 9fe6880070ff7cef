use std::path::PathBuf;
use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed input file; `line` is 1-based.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    /// Invalid argument or configuration value.
    #[error("invalid {what}: {msg}")]
    Invalid { what: &'static str, msg: String },
    /// Matrix/vector dimensions don't agree.
    #[error("shape mismatch in {context}: {msg}")]
    Shape { context: &'static str, msg: String },
    /// A computation produced NaN or infinity.
    #[error("non-finite value during {phase}")]
    NonFinite { phase: String },
    /// A backprop cache no longer matches the inputs it was built from.
    #[error("stale forward cache: {0}")]
    StaleCache(&'static str),
    #[error("{0} is empty")]
    Empty(&'static str),
    /// A failure tagged with the experiment phase it occurred in.
    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            msg: msg.into(),
        }
    }

    pub(crate) fn shape(context: &'static str, msg: impl Into<String>) -> Self {
        Error::Shape {
            context,
            msg: msg.into(),
        }
    }

    pub(crate) fn in_phase(phase: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Phase { phase, source: Box::new(source) }
    }
}
