use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unsupported format: field `{field}`: {detail}")]
    UnsupportedFormat { field: &'static str, detail: String },
    #[error("degenerate correlation: {0}")]
    DegenerateCorrelation(String),
    #[error("non-finite loss {loss} at step {step} (lr {lr:e})")]
    NonFiniteLoss { step: usize, lr: f64, loss: f64 },
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
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
