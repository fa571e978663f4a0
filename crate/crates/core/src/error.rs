use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left} vs {right}")]
    Shape {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0}")]
    Data(String),

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("embedding file: {0}")]
    Format(#[from] crate::exchange::FormatError),

    #[error("protocol: {0}")]
    Protocol(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("scenario {scenario}: {source}")]
    Scenario {
        scenario: u8,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: impl ToString, right: impl ToString) -> Self {
        Error::Shape {
            op,
            left: left.to_string(),
            right: right.to_string(),
        }
    }

    /// True for errors caused by the inputs (bad files, bad shapes, bad
    /// configuration) rather than by the environment or a failed computation.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Shape { .. }
            | Error::InvalidArgument(_)
            | Error::Data(_)
            | Error::Csv { .. }
            | Error::Format(_)
            | Error::Manifest(_)
            | Error::Json(_) => true,
            Error::Scenario { source, .. } => source.is_data_error(),
            Error::Singular(_) | Error::Diverged { .. } | Error::Protocol(_) | Error::Io(_) => {
                false
            }
        }
    }
}
