use std::fs::{File, OpenOptions};
use std::io::Write;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::codec;
use crate::{Format, LogError};

/// Acknowledgement of a successful append.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AppendReceipt {
    pub records_written: usize,
    pub bytes_written: usize,
    /// Always `true` on success: the bytes went through `fsync` before the
    /// call returned.
    pub durable: bool,
}

/// An open, append-only log file bound to one format and one record type.
///
/// The record type parameter is the file's schema: a handle accepts only
/// `T`. Appends are serialized through `&mut self`; no file lock is taken,
/// so callers must not open two handles on the same file.
#[derive(Debug)]
pub struct LogHandle<T> {
    path: PathBuf,
    format: Format,
    file: Option<File>,
    position: u64,
    buf: Vec<u8>,
    _schema: PhantomData<fn(&T)>,
}

impl<T: Serialize> LogHandle<T> {
    /// Opens `path` for appending, creating it if absent. Existing contents
    /// are left untouched and the handle is positioned at end of file.
    pub fn open(path: impl AsRef<Path>, format: Format) -> Result<Self, LogError> {
        let path = path.as_ref().to_path_buf();
        let open_err = |source| LogError::Open {
            path: path.clone(),
            source,
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(open_err)?;
        let position = file.metadata().map_err(open_err)?.len();
        Ok(LogHandle {
            path,
            format,
            file: Some(file),
            position,
            buf: Vec::new(),
            _schema: PhantomData,
        })
    }

    /// Durably appends one record.
    pub fn append(&mut self, record: &T) -> Result<AppendReceipt, LogError> {
        self.append_batch(std::slice::from_ref(record))
    }

    /// Durably appends `records` in order with a single sync after the
    /// last frame. The bytes written are identical to appending each record
    /// individually. Not atomic: after a failure a prefix of the batch may
    /// be on disk.
    pub fn append_batch(&mut self, records: &[T]) -> Result<AppendReceipt, LogError> {
        if self.file.is_none() {
            return Err(LogError::Usage("append on a closed log"));
        }
        if records.is_empty() {
            return Err(LogError::Usage("append_batch needs at least one record"));
        }
        self.buf.clear();
        for record in records {
            codec::encode_into(self.format, record, &mut self.buf)?;
        }
        let file = self.file.as_mut().expect("checked open above");
        let result = file.write_all(&self.buf).and_then(|()| file.sync_all());
        match result {
            Ok(()) => {
                self.position += self.buf.len() as u64;
                Ok(AppendReceipt {
                    records_written: records.len(),
                    bytes_written: self.buf.len(),
                    durable: true,
                })
            }
            Err(e) => {
                // A partial write may have landed; resync with the real length.
                if let Ok(meta) = file.metadata() {
                    self.position = meta.len();
                }
                Err(e.into())
            }
        }
    }

    /// Releases the file. Everything acknowledged so far is already durable.
    pub fn close(&mut self) -> Result<(), LogError> {
        match self.file.take() {
            Some(file) => {
                file.sync_all()?;
                Ok(())
            }
            None => Err(LogError::Usage("log already closed")),
        }
    }
}

impl<T> LogHandle<T> {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn format(&self) -> Format {
        self.format
    }

    /// Byte offset where the next frame will start; equals the file length.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn is_open(&self) -> bool {
        self.file.is_some()
    }
}
