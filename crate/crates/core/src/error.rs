use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    Magic { expected: String, found: String },

    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u8, supported: u8 },

    #[error("truncated payload: expected {expected} bytes, got {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("malformed header: {0}")]
    Header(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("filter design error: {0}")]
    Design(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at batch {batch_index} (epoch {epoch}): loss = {loss}")]
    Divergence {
        epoch: usize,
        batch_index: usize,
        loss: f64,
        history: Vec<crate::nn::EpochStats>,
    },

    #[error("degenerate ensemble weights: every member has zero true predictions")]
    DegenerateWeights,

    #[error("incomplete character {character}: {detail}")]
    IncompleteCharacter { character: usize, detail: String },

    #[error("labels required but the data set is unlabeled")]
    MissingLabels,

    #[error("numeric error: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn header(e: impl std::fmt::Display) -> Self {
        Error::Header(e.to_string())
    }
}
