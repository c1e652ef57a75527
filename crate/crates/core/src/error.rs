use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file content. `location` is a byte offset or a line number.
    #[error("{path}: {location}: {message}")]
    Format {
        path: PathBuf,
        location: Location,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(
        "inconsistent information quantities: mutual information {mi} exceeds entropy {entropy}"
    )]
    Inconsistent { mi: f64, entropy: f64 },

    #[error("external classifier: {0}")]
    Classifier(String),

    #[error(
        "evaluating couple (th_relevance={th_relevance}, th_redundancy={th_redundancy}): {source}"
    )]
    AtCouple {
        th_relevance: f64,
        th_redundancy: f64,
        #[source]
        source: Box<Error>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Byte(u64),
    Line(usize),
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Location::Byte(offset) => write!(f, "byte {offset}"),
            Location::Line(line) => write!(f, "line {line}"),
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(
        path: impl Into<PathBuf>,
        location: Location,
        message: impl Into<String>,
    ) -> Self {
        Error::Format {
            path: path.into(),
            location,
            message: message.into(),
        }
    }

    /// Process exit code: 1 domain error, 2 configuration or I/O error,
    /// 3 external-classifier protocol error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Format { .. } | Error::Config(_) => 2,
            Error::Classifier(_) => 3,
            Error::AtCouple { source, .. } => source.exit_code(),
            Error::InvalidInput(_) | Error::DimensionMismatch(_) | Error::Inconsistent { .. } => 1,
        }
    }
}
