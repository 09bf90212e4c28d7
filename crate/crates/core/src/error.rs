use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size {0}: expected a power of two >= 2")]
    InvalidSize(usize),

    #[error("invalid stage {stage} for a {n}-point transform (expected 1..={max})")]
    InvalidStage { n: usize, stage: usize, max: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("tape error: {0}")]
    Tape(String),

    #[error("signal of {len} samples is shorter than one frame of {frame}")]
    TooShort { len: usize, frame: usize },

    #[error("degenerate signal: {0}")]
    Degenerate(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("unsupported audio format in chunk '{chunk}': {reason}")]
    UnsupportedFormat { chunk: String, reason: String },

    #[error("checkpoint format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error("config error at line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("non-finite loss at step {step}")]
    Diverged { step: usize },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
