use std::io;
use std::path::PathBuf;

/// Failure of a log handle operation.
#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("cannot open log file {path}: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("log write failed: {0}")]
    Io(#[from] io::Error),
    #[error("record could not be encoded: {0}")]
    Encode(String),
    #[error("usage error: {0}")]
    Usage(&'static str),
}

/// Why a frame could not be decoded. Every variant carries the byte offset
/// of the start of the offending frame.
///
/// Distinct variants may be produced by the same kind of damage (a flipped
/// payload byte can surface as either a checksum mismatch or a malformed
/// value), so callers should treat them all as "this frame is bad".
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("checksum mismatch in frame at offset {offset}: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { offset: u64, stored: u32, computed: u32 },
    #[error("malformed value in frame at offset {offset}: {detail}")]
    MalformedValue { offset: u64, detail: String },
    #[error("frame at offset {offset} does not match the record schema: {detail}")]
    SchemaMismatch { offset: u64, detail: String },
    #[error("input ends inside the frame at offset {offset}")]
    TruncatedFrame { offset: u64 },
    #[error("read failed in frame at offset {offset}: {detail}")]
    Io {
        offset: u64,
        kind: io::ErrorKind,
        detail: String,
    },
}

impl DecodeError {
    pub fn offset(&self) -> u64 {
        match *self {
            DecodeError::ChecksumMismatch { offset, .. }
            | DecodeError::MalformedValue { offset, .. }
            | DecodeError::SchemaMismatch { offset, .. }
            | DecodeError::TruncatedFrame { offset }
            | DecodeError::Io { offset, .. } => offset,
        }
    }

    pub fn is_truncation(&self) -> bool {
        matches!(self, DecodeError::TruncatedFrame { .. })
    }

    pub(crate) fn io(offset: u64, err: &io::Error) -> Self {
        DecodeError::Io {
            offset,
            kind: err.kind(),
            detail: err.to_string(),
        }
    }
}
