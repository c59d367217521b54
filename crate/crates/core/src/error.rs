use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied an argument outside the operation's domain.
    #[error("usage error: {0}")]
    Usage(String),
    /// An input object violates one of its invariants.
    #[error("validation error: {0}")]
    Validation(String),
    /// A numerical check failed (e.g. a residue that should vanish did not).
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Problems found while reading a counts or expectation-table file.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Malformed {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: duplicate outcome string \"{outcome}\"")]
    DuplicateOutcome { line: usize, outcome: String },
    #[error("line {line}: outcome \"{outcome}\" has {found} bits, expected {expected}")]
    BitLength {
        line: usize,
        outcome: String,
        found: usize,
        expected: usize,
    },
    #[error("line {line}: setting has {found} labels, expected {expected}")]
    SettingLength {
        line: usize,
        found: usize,
        expected: usize,
    },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
