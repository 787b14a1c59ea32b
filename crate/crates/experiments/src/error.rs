use autoec_agents::checkpoint::CheckpointError;

#[derive(Debug, thiserror::Error)]
pub enum ExpError {
    #[error(transparent)]
    Core(#[from] autoec_core::Error),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(String),
    #[error("unknown baseline {0:?}")]
    UnknownBaseline(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ExpError>;
