//! Fail-stop replay of a log file.
//!
//! A [`ReplayCursor`] yields records lazily in file order and stops for good
//! at the first frame that does not decode, recording why in a
//! [`TerminalStatus`]. Records after a bad frame are never yielded, even if
//! they are individually well formed.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::marker::PhantomData;
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::codec::{FrameDecoder, Tracked};
use crate::{DecodeError, Format};

/// Read-ahead used by [`replay`].
pub const DEFAULT_BUFFER_CAPACITY: usize = 64 * 1024;

/// How a replay ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TerminalKind {
    /// The input ended exactly at a frame boundary.
    CleanEnd,
    /// The frame at `offset` is damaged.
    Corrupt { offset: u64, cause: DecodeError },
    /// The input ends partway through the frame at `offset`, the usual
    /// signature of a write torn by a crash.
    Truncated { offset: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TerminalStatus {
    pub kind: TerminalKind,
    pub records_recovered: u64,
}

impl TerminalStatus {
    pub fn is_clean(&self) -> bool {
        self.kind == TerminalKind::CleanEnd
    }

    /// Offset of the frame that stopped the replay, if any.
    pub fn error_offset(&self) -> Option<u64> {
        match self.kind {
            TerminalKind::CleanEnd => None,
            TerminalKind::Corrupt { offset, .. } | TerminalKind::Truncated { offset } => Some(offset),
        }
    }
}

/// A decoded record with its position in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replayed<T> {
    pub index: u64,
    pub offset: u64,
    pub len: u64,
    pub record: T,
}

/// Lazy, single-pass reader over the frames of one log.
pub struct ReplayCursor<T, R> {
    src: Tracked<R>,
    decoder: FrameDecoder,
    recovered: u64,
    terminal: Option<TerminalStatus>,
    _schema: PhantomData<fn() -> T>,
}

/// Opens `path` for replay with the default read-ahead.
pub fn replay<T: DeserializeOwned>(path: impl AsRef<Path>, format: Format) -> io::Result<ReplayCursor<T, BufReader<File>>> {
    replay_with_capacity(path, format, DEFAULT_BUFFER_CAPACITY)
}

pub fn replay_with_capacity<T: DeserializeOwned>(
    path: impl AsRef<Path>,
    format: Format,
    capacity: usize,
) -> io::Result<ReplayCursor<T, BufReader<File>>> {
    let file = File::open(path)?;
    Ok(ReplayCursor::new(BufReader::with_capacity(capacity, file), format))
}

impl<T, R> ReplayCursor<T, R>
where
    T: DeserializeOwned,
    R: BufRead,
{
    pub fn new(reader: R, format: Format) -> Self {
        ReplayCursor {
            src: Tracked::new(reader),
            decoder: FrameDecoder::new(format),
            recovered: 0,
            terminal: None,
            _schema: PhantomData,
        }
    }

    /// Decodes the next frame, or returns `None` once the cursor is
    /// terminal. An `Err` is returned exactly once, on the frame that
    /// stopped the replay.
    pub fn next_frame(&mut self) -> Option<Result<Replayed<T>, DecodeError>> {
        if self.terminal.is_some() {
            return None;
        }
        match self.decoder.decode(&mut self.src) {
            Ok(Some((offset, record))) => {
                let index = self.recovered;
                self.recovered += 1;
                Some(Ok(Replayed {
                    index,
                    offset,
                    len: self.src.position() - offset,
                    record,
                }))
            }
            Ok(None) => {
                self.finish(TerminalKind::CleanEnd);
                None
            }
            Err(err) => {
                let kind = match err {
                    DecodeError::TruncatedFrame { offset } => TerminalKind::Truncated { offset },
                    ref other => TerminalKind::Corrupt {
                        offset: other.offset(),
                        cause: other.clone(),
                    },
                };
                self.finish(kind);
                Some(Err(err))
            }
        }
    }

    fn finish(&mut self, kind: TerminalKind) {
        self.terminal = Some(TerminalStatus {
            kind,
            records_recovered: self.recovered,
        });
    }

    /// Runs the replay to its end, returning every recovered record and the
    /// terminal status.
    pub fn drain(mut self) -> (Vec<T>, TerminalStatus) {
        let mut records = Vec::new();
        while let Some(Ok(r)) = self.next_frame() {
            records.push(r.record);
        }
        let status = self.terminal.take().expect("cursor is terminal after draining");
        (records, status)
    }
}

impl<T, R> ReplayCursor<T, R> {
    /// `Some` once the replay has ended.
    pub fn terminal(&self) -> Option<&TerminalStatus> {
        self.terminal.as_ref()
    }

    pub fn records_recovered(&self) -> u64 {
        self.recovered
    }

    /// Offset of the next unread frame byte.
    pub fn position(&self) -> u64 {
        self.src.position()
    }

    pub fn format(&self) -> Format {
        self.decoder.format()
    }

    pub fn get_ref(&self) -> &R {
        self.src.get_ref()
    }
}

impl<T, R> Iterator for ReplayCursor<T, R>
where
    T: DeserializeOwned,
    R: BufRead,
{
    type Item = Result<T, DecodeError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().map(|r| r.map(|f| f.record))
    }
}

/// Reader wrapper that counts bytes pulled from the underlying source.
#[derive(Debug)]
pub struct CountingReader<R> {
    inner: R,
    bytes: u64,
}

impl<R> CountingReader<R> {
    pub fn new(inner: R) -> Self {
        CountingReader { inner, bytes: 0 }
    }

    pub fn bytes_read(&self) -> u64 {
        self.bytes
    }
}

impl<R: Read> Read for CountingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.bytes += n as u64;
        Ok(n)
    }
}
