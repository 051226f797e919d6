use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus has {available} authors, {requested} requested")]
    NotEnoughAuthors { requested: usize, available: usize },

    #[error("author {author} has {available} reviews, {requested} requested")]
    NotEnoughReviews {
        author: String,
        requested: usize,
        available: usize,
    },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("class {class} has {available} samples, at least {required} required")]
    ClassTooSmall {
        class: usize,
        required: usize,
        available: usize,
    },

    #[error("embedding file: {0}")]
    EmbeddingFormat(String),

    #[error("corpus file: {0}")]
    CorpusFormat(String),

    #[error("pattern file line {line}: {message}")]
    Pattern { line: usize, message: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
