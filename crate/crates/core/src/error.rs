use std::io;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index {index} out of range for {what} (len {len})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("stale activation record: recorded at revision {recorded}, network is at revision {current}")]
    StaleActivations { recorded: u64, current: u64 },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { expected: u16, found: u16 },

    #[error("truncated file while reading {0}")]
    Truncated(&'static str),

    #[error("dimension mismatch for {what}: file has {file}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        file: usize,
        expected: usize,
    },

    #[error("parse error at {location} line {line}: {message}")]
    Parse {
        location: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Shape {
            context,
            expected,
            actual,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            line,
            message: message.into(),
        }
    }
}
