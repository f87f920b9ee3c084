use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown PRN {0} (supported range is 1..=37)")]
    UnknownPrn(u32),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unit length mismatch: expected {expected} samples, got {actual}")]
    UnitLength { expected: usize, actual: usize },

    #[error("grid shape or plan mismatch: {0}")]
    Shape(String),

    #[error("needs at least two units, got {0}")]
    TooFewUnits(usize),

    #[error("empty grid")]
    EmptyGrid,

    #[error("exclusion window covers every candidate cell")]
    ExclusionTooWide,

    #[error("satellite never rises above the {mask_deg} deg elevation mask")]
    NoVisibility { mask_deg: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown sample format `{0}`")]
    UnknownFormat(String),

    #[error("truncated file {path}: length {len} bytes is not a multiple of the {width}-byte sample width (trailing bytes start at offset {offset})")]
    Truncated {
        path: PathBuf,
        len: u64,
        width: usize,
        offset: u64,
    },

    #[error("read out of range: samples {offset}..{end} requested, file holds {available} (byte offset {byte_offset})")]
    OutOfRange {
        offset: u64,
        end: u64,
        available: u64,
        byte_offset: u64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("truth sidecar error: {0}")]
    Truth(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
