use thiserror::Error;

use crate::label::LabelKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A record could not be parsed or has the wrong shape.
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    /// Records parse but violate a dataset invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("label kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: LabelKind, found: LabelKind },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The model does not carry a block required by the requested estimator.
    #[error("model is missing the {0} block")]
    MissingBlock(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }
}
