//! Error type shared by the model, rank engine, sketcher, and estimators.

use alloc::string::String;
use core::fmt;

/// Errors raised by dataset construction, rank evaluation, sketch building,
/// and estimation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A numeric argument was outside its domain (negative weight, seed not
    /// in (0,1), ...).
    Domain(String),
    /// Invalid configuration: unknown assignment id, incompatible rank
    /// family/coordination mode, bad sketch parameters.
    Config(String),
    /// Malformed input data (duplicate keys, zero-weight dispersed records,
    /// ragged weight vectors).
    Data(String),
    /// A key or assignment lookup failed.
    Lookup(String),
    /// The requested estimator does not exist for this summary
    /// (mode, aggregate) combination.
    Unsupported(String),
    /// An internal invariant was violated; indicates a bug, not bad input.
    Internal(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Data(m) => write!(f, "data error: {m}"),
            Error::Lookup(m) => write!(f, "lookup error: {m}"),
            Error::Unsupported(m) => write!(f, "unsupported estimator: {m}"),
            Error::Internal(m) => write!(f, "internal invariant violation: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
