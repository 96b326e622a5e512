use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// [`Error::code`] gives a stable, machine-parsable tag for each variant; the
/// command line front end prints it in front of the human-readable message.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {op} got {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid shape for {op}: {reason}")]
    Rank { op: &'static str, reason: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("index {index} out of range for {what} of size {size}")]
    Index {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("corrupt tape: {0}")]
    CorruptTape(String),

    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("model state: {0}")]
    State(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Shape { .. } | Error::Rank { .. } => "E_SHAPE",
            Error::Parameter(_) => "E_PARAM",
            Error::Index { .. } => "E_INDEX",
            Error::NonFinite(_) => "E_NONFINITE",
            Error::CorruptTape(_) => "E_TAPE",
            Error::Undefined(_) => "E_UNDEFINED",
            Error::Empty(_) => "E_EMPTY",
            Error::UnknownId(_) => "E_LOOKUP",
            Error::Parse { .. } => "E_PARSE",
            Error::Invalid(_) => "E_INVALID",
            Error::State(_) => "E_STATE",
            Error::Diverged(_) => "E_DIVERGED",
            Error::Infeasible(_) => "E_INFEASIBLE",
            Error::Io { .. } => "E_IO",
            Error::Json(_) => "E_JSON",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl AsRef<std::path::Path>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            line,
            message: message.into(),
        }
    }
}
