//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on user-supplied values was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two quantities that must agree in length or width did not.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A resource guard (qubit count, enumeration size, grid size) was exceeded.
    #[error("{what} guard exceeded: {value} > {limit}")]
    Guard {
        what: &'static str,
        value: u128,
        limit: u128,
    },

    /// A numerical routine failed (non-finite values, factorization failure, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A configuration file was missing, unparseable or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn guard(
        what: &'static str,
        value: impl Into<u128>,
        limit: impl Into<u128>,
    ) -> Self {
        Error::Guard {
            what,
            value: value.into(),
            limit: limit.into(),
        }
    }

    pub(crate) fn dim(context: &'static str, expected: usize, got: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            got,
        }
    }
}

/// Checks that two lengths agree.
pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::dim(context, expected, got))
    }
}
