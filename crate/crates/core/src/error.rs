use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("no usable rows in input ({dropped} dropped)")]
    EmptyInput { dropped: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unfillable gap at timestamp {timestamp}: no previous slot")]
    UnfillableGap { timestamp: i64 },
    #[error("feature {feature} is constant and cannot be inverted")]
    NonInvertible { feature: usize },
    #[error("non-finite value in {layer}")]
    NonFinite { layer: String },
    #[error("actual value at index {index} is zero")]
    DivisionByZero { index: usize },
    #[error("epoch {epoch}, batch {batch}: {source}")]
    Training {
        epoch: usize,
        batch: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },
}

/// Coarse classification used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn non_finite(layer: impl Into<String>) -> Self {
        Error::NonFinite {
            layer: layer.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NonFinite { .. } | Error::DivisionByZero { .. } | Error::NonInvertible { .. } => {
                ErrorClass::Numeric
            }
            Error::Training { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }
}
