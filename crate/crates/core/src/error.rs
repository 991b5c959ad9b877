use std::path::PathBuf;

use thiserror::Error;
use wkode_autodiff::AdError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed file {}: {reason}", path.display())]
    MalformedFile { path: PathBuf, reason: String },

    #[error("record {id} has {len} samples, at least {min} required")]
    EmptyRecord { id: String, len: usize, min: usize },

    #[error("no beats: {0}")]
    NoBeats(String),

    #[error("window of {0} samples is too short to resample")]
    WindowTooShort(usize),

    #[error("degenerate channel {0}: standard deviation below 1e-8")]
    DegenerateChannel(&'static str),

    #[error("too few beats: {0}")]
    TooFewBeats(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("every step of epoch {epoch} hit the non-finite guard ({skipped} skipped)")]
    AllStepsSkipped { epoch: usize, skipped: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Autodiff(#[from] AdError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::MalformedFile {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for failures caused by NaN/infinity anywhere in a computation.
    pub fn is_nonfinite(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_) | Error::Autodiff(AdError::NonFinite { .. })
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
