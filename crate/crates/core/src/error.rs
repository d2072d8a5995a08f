use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the localization toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no signal in analysis window")]
    NoSignal,
    #[error("undefined SNR: input has zero power")]
    ZeroPower,
    #[error("model error: {0}")]
    Model(String),
    #[error("shape error: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    #[error("input error: {0}")]
    Input(String),
    #[error("association error: {0}")]
    Association(String),
    #[error("rank deficiency: {0}")]
    RankDeficient(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("pipeline error: {0}")]
    Pipeline(String),
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.to_string(),
        }
    }
}
