//! Crate-wide error type.

use std::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by this crate.
///
/// The split matters to callers (and to the CLI exit-code contract):
/// [`Error::Domain`] means the inputs were invalid, while
/// [`Error::Convergence`] means the inputs were fine but a series,
/// continued fraction, root finder, or fit failed to converge.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid argument or malformed input data.
    Domain(String),
    /// An iterative computation exhausted its budget or failed.
    Convergence(String),
    /// File I/O failure, with path context.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Convergence(msg) => write!(f, "convergence failure: {msg}"),
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Error {
        Error::Domain(msg.into())
    }

    pub(crate) fn convergence(msg: impl Into<String>) -> Error {
        Error::Convergence(msg.into())
    }
}
