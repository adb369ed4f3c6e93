//! Crate-wide error type.

/// Errors produced by any specfill component.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("audio error: {0}")]
    Audio(String),
    #[error("feature error: {0}")]
    Feature(String),
    #[error("vocabulary error: {0}")]
    Vocab(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("masking error: {0}")]
    Masking(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("inference error: {0}")]
    Inference(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by invalid user input (bad files, mismatched
    /// shapes, unknown symbols) as opposed to runtime/numerical failures.
    /// The CLI maps validation errors to exit code 2 and the rest to 3.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Training(_) | Error::Numerical(_) | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
