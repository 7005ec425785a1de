use std::io;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// The variants group failures the way the command-line front end reports
/// them: malformed input data, numerical breakdown, and misuse of an API.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at offset {offset}: {kind}")]
    Parse { offset: usize, kind: ParseErrorKind },

    #[error("illegal action {action} at step {step}: {reason} (state: {state})")]
    IllegalAction { step: usize, action: String, reason: String, state: String },

    #[error("incomplete action sequence: {0}")]
    Incomplete(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("vocabulary mismatch: expected {expected}, found {found}")]
    VocabMismatch { expected: String, found: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Unbalanced,
    EmptyConstituent,
    StrayToken(String),
    MissingLabel,
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseErrorKind::Unbalanced => write!(f, "unbalanced parentheses"),
            ParseErrorKind::EmptyConstituent => write!(f, "empty constituent"),
            ParseErrorKind::StrayToken(tok) => write!(f, "stray token {tok:?} outside any constituent"),
            ParseErrorKind::MissingLabel => write!(f, "constituent without a label"),
        }
    }
}

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures caused by non-finite values or degenerate distributions.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }

    /// True for failures caused by the caller's arguments rather than data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
