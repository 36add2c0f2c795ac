use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad caller input: dimensions, ranges, mismatched shapes.
    #[error("invalid input: {0}")]
    Input(String),

    /// Parameters that cannot produce a valid search (e.g. empty candidate set).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A broken internal invariant. Indicates a bug, not bad input.
    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("label {label} does not fit in a 16-bit PNG (max 65535); use the CSV format")]
    LabelOverflow { label: u32 },

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: ::image::ImageError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }
}
