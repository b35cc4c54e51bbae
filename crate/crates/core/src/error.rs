use thiserror::Error;

/// Errors raised anywhere in the testbed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("no vanishing point: {0}")]
    NoVanishingPoint(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// No beam region overlaps the isolated transmitter pixels.
    #[error("empty search space")]
    EmptySearchSpace,

    #[error("identification failed: {0}")]
    IdentificationFailure(String),

    /// The transmitter track was dropped; `frame` is the index of the first frame without it.
    #[error("tracking lost at frame {frame}")]
    TrackingLost { frame: usize },

    #[error("non-finite activations in layer {layer}")]
    NumericFailure { layer: String },

    #[error("malformed data: {0}")]
    Format(String),

    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
