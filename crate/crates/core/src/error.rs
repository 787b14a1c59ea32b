use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("id field out of range: {0}")]
    Encoding(String),
    #[error("no registered variant with id {0}")]
    UnknownId(String),
    #[error("illegal workflow: {0}")]
    IllegalWorkflow(String),
    #[error("workflow parse error: {0}")]
    Parse(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("episode already finished")]
    EpisodeFinished,
    #[error("manifest error: {0}")]
    Manifest(String),
}

pub type Result<T> = std::result::Result<T, Error>;
