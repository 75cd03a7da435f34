use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the replacement pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    /// A caller broke an operation's precondition (shapes, subset relations).
    #[error("contract violated: {0}")]
    Contract(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no candidate: every enumerated candidate was empty after removing team members")]
    NoCandidate { examined_tuples: u64 },

    #[error("search budget exceeded: {required} candidates needed, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("size cap exceeded: {what} has {size} nodes, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("solver guard violated: {0}")]
    Convergence(String),

    #[error("non-finite {term} loss at epoch {epoch}")]
    NonFinite { term: &'static str, epoch: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
