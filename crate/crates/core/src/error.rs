use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("policy has no entry for reachable infoset {infoset} ({label})")]
    PolicyDomain { infoset: usize, label: String },

    #[error("malformed game tree: {0}")]
    Tree(String),

    #[error("enumeration would produce more than {cap} strategies")]
    TooLarge { cap: usize },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("no history: average requested before any update")]
    EmptyHistory,

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
