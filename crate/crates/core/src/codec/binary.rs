//! Checksummed MessagePack frames.
//!
//! ```text
//! frame := msgpack(record) ++ msgpack_uint(crc32(msgpack(record)))
//! file  := frame*
//! ```
//!
//! Records are serialized as maps keyed by field name. The trailer is
//! written in shortest form; any unsigned encoding is accepted on read.
//! There is no length prefix: the payload boundary is found by scanning
//! the MessagePack structure.

use std::io::BufRead;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::msgpack::{self, ScanError};
use super::Tracked;
use crate::{crc32, DecodeError, LogError};

/// Serializes `record` as a MessagePack map without a trailer.
pub fn encode_payload<T: Serialize>(record: &T) -> Result<Vec<u8>, LogError> {
    rmp_serde::to_vec_named(record).map_err(|e| LogError::Encode(e.to_string()))
}

pub(crate) fn encode_into<T: Serialize>(record: &T, out: &mut Vec<u8>) -> Result<(), LogError> {
    let start = out.len();
    if let Err(e) = rmp_serde::encode::write_named(out, record) {
        out.truncate(start);
        return Err(LogError::Encode(e.to_string()));
    }
    let checksum = crc32(&out[start..]);
    rmp::encode::write_uint(out, u64::from(checksum.value())).map_err(|e| LogError::Encode(e.to_string()))?;
    Ok(())
}

/// One frame split into its parts, without decoding the payload against a
/// schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFrame {
    pub offset: u64,
    pub payload: Vec<u8>,
    /// Length of the encoded trailer in bytes.
    pub trailer_len: usize,
    pub stored: u32,
    pub computed: u32,
}

impl RawFrame {
    pub fn len(&self) -> usize {
        self.payload.len() + self.trailer_len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn checksum_ok(&self) -> bool {
        self.stored == self.computed
    }
}

fn scan_error(offset: u64, what: &str, err: ScanError) -> DecodeError {
    match err {
        ScanError::Eof => DecodeError::TruncatedFrame { offset },
        ScanError::Unexpected { marker, position } => DecodeError::MalformedValue {
            offset,
            detail: format!("unexpected marker {marker:#04x} at {what} byte {position}"),
        },
        ScanError::Io(e) => DecodeError::io(offset, &e),
    }
}

/// Reads the payload and trailer of the next frame. `Ok(None)` at a clean
/// end of input. The checksum is computed but not enforced.
fn read_parts<R: BufRead>(src: &mut Tracked<R>, payload: &mut Vec<u8>) -> Result<Option<(u64, usize, u32)>, DecodeError> {
    let offset = src.position();
    match src.fill_buf() {
        Ok([]) => return Ok(None),
        Ok(_) => {}
        Err(e) => return Err(DecodeError::io(offset, &e)),
    }
    payload.clear();
    msgpack::read_value(src, payload).map_err(|e| scan_error(offset, "payload", e))?;
    let mut trailer = Vec::with_capacity(5);
    let stored = msgpack::read_uint(src, &mut trailer).map_err(|e| scan_error(offset, "checksum", e))?;
    let stored = u32::try_from(stored).map_err(|_| DecodeError::MalformedValue {
        offset,
        detail: format!("checksum {stored} exceeds 32 bits"),
    })?;
    Ok(Some((offset, trailer.len(), stored)))
}

/// Decodes the next frame from `src`, returning the record only if the
/// stored checksum matches the payload bytes actually read. The record is
/// returned with the offset of its frame.
pub fn decode<T, R>(src: &mut Tracked<R>, scratch: &mut Vec<u8>) -> Result<Option<(u64, T)>, DecodeError>
where
    T: DeserializeOwned,
    R: BufRead,
{
    if let Some(done) = decode_buffered(src) {
        return done;
    }
    let Some((offset, _, stored)) = read_parts(src, scratch)? else {
        return Ok(None);
    };
    verify_and_decode(offset, scratch, stored).map(|r| Some((offset, r)))
}

fn verify_and_decode<T: DeserializeOwned>(offset: u64, payload: &[u8], stored: u32) -> Result<T, DecodeError> {
    let computed = crc32(payload).value();
    if stored != computed {
        return Err(DecodeError::ChecksumMismatch { offset, stored, computed });
    }
    rmp_serde::from_slice(payload).map_err(|e| DecodeError::SchemaMismatch {
        offset,
        detail: e.to_string(),
    })
}

/// Decodes a frame in place when it lies wholly inside the read buffer.
/// Returns `None` when the frame may extend past the buffer, leaving the
/// source untouched for the streaming path.
fn decode_buffered<T, R>(src: &mut Tracked<R>) -> Option<Result<Option<(u64, T)>, DecodeError>>
where
    T: DeserializeOwned,
    R: BufRead,
{
    let offset = src.position();
    let buf = src.fill_buf().ok()?;
    if buf.is_empty() {
        return None;
    }
    let payload_len = match msgpack::scan(buf) {
        Ok(n) => n,
        Err(ScanError::Eof) => return None,
        Err(e) => return Some(Err(scan_error(offset, "payload", e))),
    };
    let (stored, trailer_len) = match msgpack::parse_uint(&buf[payload_len..]) {
        Ok(v) => v,
        Err(ScanError::Eof) => return None,
        Err(e) => return Some(Err(scan_error(offset, "checksum", e))),
    };
    let result = match u32::try_from(stored) {
        Ok(stored) => verify_and_decode(offset, &buf[..payload_len], stored),
        Err(_) => Err(DecodeError::MalformedValue {
            offset,
            detail: format!("checksum {stored} exceeds 32 bits"),
        }),
    };
    src.consume(payload_len + trailer_len);
    Some(result.map(|r| Some((offset, r))))
}

/// Schema-less frame iterator for inspection tools. Stops after the first
/// structural error; checksum mismatches are reported in the frame itself
/// and do not stop iteration.
pub struct RawFrames<R> {
    src: Tracked<R>,
    done: bool,
}

impl<R: BufRead> RawFrames<R> {
    pub fn new(reader: R) -> Self {
        RawFrames {
            src: Tracked::new(reader),
            done: false,
        }
    }

    /// Offset of the next unread byte.
    pub fn position(&self) -> u64 {
        self.src.position()
    }
}

impl<R: BufRead> Iterator for RawFrames<R> {
    type Item = Result<RawFrame, DecodeError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut payload = Vec::new();
        match read_parts(&mut self.src, &mut payload) {
            Ok(Some((offset, trailer_len, stored))) => {
                let computed = crc32(&payload).value();
                Some(Ok(RawFrame {
                    offset,
                    payload,
                    trailer_len,
                    stored,
                    computed,
                }))
            }
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}
