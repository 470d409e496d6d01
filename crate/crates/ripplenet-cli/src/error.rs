//! Process-level error type: every failure mode maps to a documented exit
//! code so scripts can branch on outcomes.
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 1    | any other error (bad config, shape, ...)  |
//! | 2    | a referenced input file does not exist    |
//! | 3    | an input file has a malformed line        |
//! | 4    | the checkpoint to load does not exist     |
//! | 5    | an unknown user or item name was requested|

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}: file not found")]
    MissingFile(PathBuf),
    #[error("{path}:{line}: {what}")]
    MalformedLine { path: PathBuf, line: usize, what: String },
    #[error("checkpoint {0} not found; run `ripple train` first")]
    MissingCheckpoint(PathBuf),
    #[error("unknown user {0:?}")]
    UnknownUser(String),
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Kg(#[from] ripplenet::kg::KgError),
    #[error(transparent)]
    Dataset(#[from] ripplenet::dataset::DatasetError),
    #[error(transparent)]
    Model(#[from] ripplenet::model::ModelError),
    #[error(transparent)]
    Train(#[from] ripplenet::trainer::TrainError),
    #[error(transparent)]
    Metrics(#[from] ripplenet::metrics::MetricsError),
    #[error(transparent)]
    Insight(#[from] ripplenet::insight::InsightError),
    #[error(transparent)]
    Checkpoint(#[from] ripplenet::checkpoint::CheckpointError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingFile(_) => 2,
            CliError::MalformedLine { .. } => 3,
            CliError::MissingCheckpoint(_) => 4,
            CliError::UnknownUser(_) | CliError::UnknownItem(_) => 5,
            _ => 1,
        }
    }
}
