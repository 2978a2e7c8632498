use std::path::PathBuf;

/// Errors produced by the mortality modelling pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid age/year window: {0}")]
    InvalidWindow(String),

    #[error("cell (age {age}, year {year}) lies outside the window")]
    OutOfWindow { age: i32, year: i32 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate draw: {0}")]
    DegenerateDraw(String),

    #[error("state path violates the cohort-shift identity at age index {age_index}, time {time} (|diff| = {diff:e})")]
    CorruptedPath {
        age_index: usize,
        time: usize,
        diff: f64,
    },

    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("iteration {iteration}: {source}")]
    Sampler {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Broad classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidWindow(_)
            | Error::OutOfWindow { .. }
            | Error::Data(_)
            | Error::Parse { .. }
            | Error::Io { .. }
            | Error::Json { .. } => ErrorKind::Data,
            Error::DimensionMismatch(_) | Error::InvalidParameter(_) => ErrorKind::Usage,
            Error::DegenerateDraw(_) | Error::CorruptedPath { .. } | Error::IllConditioned(_) => {
                ErrorKind::Numeric
            }
            Error::Sampler { source, .. } => source.kind(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
