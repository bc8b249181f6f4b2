use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus: no tokens to build a vocabulary from")]
    EmptyCorpus,

    #[error("corpus has no sentence boundaries; use stream chunking")]
    UnsupportedPolicy,

    #[error("corpus too small: need at least {needed} tokens, got {got}")]
    CorpusTooSmall { needed: usize, got: usize },

    #[error("invalid rank {0}: ranks start at 1")]
    InvalidRank(usize),

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid dropout probability {0}: must lie in [0, 1)")]
    InvalidDropout(f64),

    #[error("numerical divergence at {0}")]
    Divergence(String),

    #[error("config error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("vocabulary hash mismatch: checkpoint has {expected}, data has {found}")]
    VocabMismatch { expected: String, found: String },

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("bad data file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
