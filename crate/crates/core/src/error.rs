use std::path::PathBuf;

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Internal,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Malformed {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
    #[error("duplicate link id `{link}` in the {language} corpus")]
    DuplicateLinkId { language: String, link: String },
    #[error("corpus `{0}` is empty after filtering")]
    EmptyCorpus(String),
    #[error("document `{0}` has no tokens left after filtering")]
    EmptyDocument(String),
    #[error("both corpora are in language `{0}`")]
    SameLanguage(String),
    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("need at least {needed} concepts, have {have}")]
    TooFewConcepts { needed: usize, have: usize },
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Internal(_) | Error::IndexOutOfRange { .. } => ErrorClass::Internal,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
