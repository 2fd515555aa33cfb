use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by the toolkit.
///
/// Variants fall in three families: invalid input or configuration,
/// numeric failure during optimization, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no token occurs at least {min_count} times")]
    EmptyVocabulary { min_count: u64 },

    #[error("vocabulary needs at least {needed} words, got {got}")]
    VocabularyTooSmall { needed: usize, got: usize },

    #[error("unknown word: {0}")]
    UnknownWord(String),

    #[error("unknown label: {0}")]
    UnknownLabel(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("class {class} has {size} members, fewer than k = {k}")]
    ClassTooSmall { class: String, size: usize, k: usize },

    #[error("AUC is undefined: {0}")]
    UndefinedAuc(&'static str),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("{0}")]
    Format(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from a numeric failure (divergence, NaN) rather
    /// than from bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NonFinite(_) => true,
            Error::Fold { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
