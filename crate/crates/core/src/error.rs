use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (terminal state passed where
    /// a nonterminal one is required, mismatched dimensions, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("non-proper policy suspected: episode exceeded {max_steps} steps without reaching the terminal state")]
    EpisodeTooLong { max_steps: usize },

    #[error("non-proper policy: {0} system is singular")]
    NonProper(&'static str),

    #[error("rank deficiency under occupancy weighting ({dim} features)")]
    RankDeficient { dim: usize },

    #[error("divergence at episode {episode}: non-finite {what} after a step of size {step:e}; reduce the step sizes")]
    Divergence {
        episode: u64,
        what: &'static str,
        step: f64,
    },

    #[error("non-finite gradient estimate: {0:?}")]
    NonFiniteGradient(Vec<f64>),

    #[error("training aborted at episode {episode}: {source}")]
    Training {
        episode: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
