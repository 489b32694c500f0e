//! Record encoding and frame decoding for both on-disk formats.

pub mod binary;
pub mod msgpack;
pub mod text;

use std::io::{self, BufRead, Read};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{DecodeError, Format, LogError};

/// A buffered source that tracks how many bytes have been consumed, so
/// decoders can report the file offset of each frame.
#[derive(Debug)]
pub struct Tracked<R> {
    inner: R,
    position: u64,
}

impl<R> Tracked<R> {
    pub fn new(inner: R) -> Self {
        Tracked { inner, position: 0 }
    }

    /// Bytes consumed so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn get_ref(&self) -> &R {
        &self.inner
    }

    pub fn into_inner(self) -> R {
        self.inner
    }
}

impl<R: BufRead> Read for Tracked<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.position += n as u64;
        Ok(n)
    }
}

impl<R: BufRead> BufRead for Tracked<R> {
    fn fill_buf(&mut self) -> io::Result<&[u8]> {
        self.inner.fill_buf()
    }

    fn consume(&mut self, amt: usize) {
        self.position += amt as u64;
        self.inner.consume(amt);
    }
}

/// Appends the encoded frame for `record` to `out`.
pub fn encode_into<T: Serialize>(format: Format, record: &T, out: &mut Vec<u8>) -> Result<(), LogError> {
    match format {
        Format::Text => text::encode_into(record, out),
        Format::Binary => binary::encode_into(record, out),
    }
}

/// Encodes one record as a standalone frame.
pub fn encode<T: Serialize>(format: Format, record: &T) -> Result<Vec<u8>, LogError> {
    let mut out = Vec::new();
    encode_into(format, record, &mut out)?;
    Ok(out)
}

/// Frame decoder state for one format. Reuses its scratch buffer across
/// frames so steady-state decoding does not allocate per frame.
#[derive(Debug)]
pub struct FrameDecoder {
    format: Format,
    scratch: Vec<u8>,
}

impl FrameDecoder {
    pub fn new(format: Format) -> Self {
        FrameDecoder {
            format,
            scratch: Vec::new(),
        }
    }

    pub fn format(&self) -> Format {
        self.format
    }

    /// Decodes the next frame, returning the offset where it starts and the
    /// record. `Ok(None)` means the source ended cleanly at a frame boundary.
    pub fn decode<T, R>(&mut self, src: &mut Tracked<R>) -> Result<Option<(u64, T)>, DecodeError>
    where
        T: DeserializeOwned,
        R: BufRead,
    {
        match self.format {
            Format::Text => text::decode(src),
            Format::Binary => binary::decode(src, &mut self.scratch),
        }
    }
}
