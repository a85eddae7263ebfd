use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("bad magic bytes {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),

    #[error("unsupported endianness flag {0:#04x}")]
    UnsupportedEndianness(u8),

    #[error("truncated record at byte offset {offset}")]
    Truncated { offset: u64 },

    #[error("sample `{sample_id}`: {reason}")]
    InvalidRecord { sample_id: String, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("simplex budget exceeded: {required} simplices needed, budget is {budget}")]
    CapacityExceeded { required: u64, budget: u64 },

    #[error("config: {0}")]
    Config(String),

    #[error("{stage} failed for sample `{sample_id}`: {source}")]
    Stage {
        stage: &'static str,
        sample_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn record(sample_id: &str, reason: impl Into<String>) -> Self {
        Error::InvalidRecord {
            sample_id: sample_id.to_owned(),
            reason: reason.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str, sample_id: &str) -> Self {
        Error::Stage {
            stage,
            sample_id: sample_id.to_owned(),
            source: Box::new(self),
        }
    }
}
