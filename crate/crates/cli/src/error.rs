//! Error type for IO, configuration, and harness layers, with the CLI
//! exit-code contract: 0 success, 2 configuration/contract error, 3 data
//! error.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error (row {row}): {msg}")]
    Data { row: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] coordsketch_core::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(row: usize, msg: impl Into<String>) -> Self {
        Error::Data {
            row,
            msg: msg.into(),
        }
    }

    /// CLI exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data { .. } => 3,
            Error::Io(_) => 3,
            Error::Json(_) => 3,
            Error::Core(e) => match e {
                coordsketch_core::Error::Config(_)
                | coordsketch_core::Error::Domain(_)
                | coordsketch_core::Error::Unsupported(_)
                | coordsketch_core::Error::Internal(_) => 2,
                coordsketch_core::Error::Data(_) | coordsketch_core::Error::Lookup(_) => 3,
            },
        }
    }
}
