use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("character {ch:?} at position {position} is not in the vocabulary")]
    UnrepresentableChar { ch: char, position: usize },
    #[error("token id {0} is outside the vocabulary")]
    TokenOutOfRange(usize),
    #[error("invalid feature sequence: {0}")]
    InvalidFeatures(String),
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("utterance {0} has no transcript")]
    MissingTranscript(String),
    #[error("utterance {0} has no pseudo transcript")]
    MissingPseudoTranscript(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("reconstruction cache has no entry for {0}")]
    CacheMiss(String),
    #[error("reference text is empty")]
    EmptyReference,
    #[error("config error: {0}")]
    Config(String),
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
