use std::io;

/// Errors raised across the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// A binary file did not match its declared layout.
    #[error("{message} at byte offset {offset}")]
    Format { offset: u64, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty region {0}")]
    EmptyRegion(usize),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("singular system: {0}")]
    Singular(String),

    /// A predictor request failed; `request_id` names the offending message.
    #[error("predictor request {request_id}: {message}")]
    Protocol { request_id: u64, message: String },

    #[error("predictor timed out after {0:?}")]
    Timeout(std::time::Duration),

    /// Wraps a failure with the index of the frame, shuffle or task it came from.
    #[error("{context} {index}: {source}")]
    At {
        context: &'static str,
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn at(self, context: &'static str, index: usize) -> Self {
        Error::At {
            context,
            index,
            source: Box::new(self),
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Format { .. } => "format",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Image(_) => "image",
            Error::InvalidInput(_) => "invalid_input",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::EmptyRegion(_) => "empty_region",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::Singular(_) => "singular",
            Error::Protocol { .. } => "protocol",
            Error::Timeout(_) => "timeout",
            Error::At { source, .. } => source.kind(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
