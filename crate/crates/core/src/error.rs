use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("cycle detected among comments: {}", .0.join(" -> "))]
    Cycle(Vec<String>),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("unknown phrase {phrase:?}")]
    UnknownPhrase {
        phrase: String,
        /// Closest lexical matches from the vocabulary.
        candidates: Vec<String>,
    },

    #[error("rank {requested} exceeds matrix dimension {available}")]
    RankTooLarge { requested: usize, available: usize },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("version mismatch: expected {expected}, found {found}")]
    Version { expected: String, found: String },

    #[error("single class present: {0}")]
    SingleClass(String),

    #[error("missing class: {0}")]
    MissingClass(String),

    #[error("comment {0} is not pending")]
    NotPending(String),

    #[error("comment {0} already labeled")]
    AlreadyLabeled(String),

    #[error("rank-deficient design matrix: {0}")]
    RankDeficient(String),

    #[error("no convergence after {iterations} iterations: {trace}")]
    NoConvergence { iterations: usize, trace: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("model is not fitted")]
    NotFitted,

    #[error("stale artifact {artifact}: expected upstream {upstream} = {expected}, found {found}")]
    Stale {
        artifact: String,
        upstream: String,
        expected: String,
        found: String,
    },

    #[error("missing artifact {0}")]
    MissingArtifact(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
