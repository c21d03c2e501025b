use std::path::PathBuf;

use thiserror::Error;

use crate::model::FailureContext;

/// An error raised by user code under test (an assertion body, an
/// argument thunk, a script builtin).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct Raised {
    pub message: String,
}

impl Raised {
    pub fn new(message: impl Into<String>) -> Self {
        Raised { message: message.into() }
    }
}

impl From<String> for Raised {
    fn from(message: String) -> Self {
        Raised { message }
    }
}

impl From<&str> for Raised {
    fn from(message: &str) -> Self {
        Raised::new(message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid-nesting: {0}")]
    InvalidNesting(String),

    #[error("invalid-structure: {0}")]
    InvalidStructure(String),

    #[error(transparent)]
    Raised(#[from] Raised),

    #[error("test failure in {}: {}", .0.test_id, .0.expression_text)]
    FailureSignal(Box<FailureContext>),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no such test module: {0}")]
    AbsentModule(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Script { path: PathBuf, line: usize, message: String },

    #[error("incomplete event stream: {0}")]
    IncompleteStream(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn is_nesting(&self) -> bool {
        matches!(self, Error::InvalidNesting(_) | Error::InvalidStructure(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
