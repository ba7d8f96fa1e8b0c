use thiserror::Error;

/// Errors produced by corpus handling, training, and privacy accounting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The removed mass is at least one topic's smoothed word total, so the
    /// pseudo distribution (and with it the per-sampling bound) is undefined.
    #[error(
        "degenerate corpus for privacy monitoring: topic {topic} has smoothed word total \
         {smoothed_total} but the removed mass is {removed}; the bound requires \
         removed < smoothed total for every topic"
    )]
    DegenerateCorpus {
        topic: usize,
        smoothed_total: f64,
        removed: usize,
    },

    #[error(
        "refusing exhaustive partition search: {partitions} partitions exceed the limit of {limit}"
    )]
    CombinatorialLimit { partitions: u128, limit: u128 },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
