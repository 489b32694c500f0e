//! Operation-replay write-ahead log.
//!
//! Records are opaque serde values appended durably to a single file and
//! replayed lazily, in order, until the end of the file or the first
//! damaged frame. Two on-disk formats are supported:
//!
//! * [`Format::Text`]: one JSON object per line, no integrity check.
//! * [`Format::Binary`]: a MessagePack payload followed by the CRC32 of the
//!   payload, itself MessagePack-encoded as an unsigned integer.
//!
//! ```no_run
//! use replaywal::{replay, Format, LogHandle};
//! use serde::{Deserialize, Serialize};
//!
//! #[derive(Serialize, Deserialize)]
//! struct Record {
//!     id: u32,
//! }
//!
//! let mut log: LogHandle<Record> = LogHandle::open("records.wal", Format::Binary)?;
//! log.append(&Record { id: 42 })?;
//! log.close()?;
//!
//! for record in replay::<Record>("records.wal", Format::Binary)? {
//!     let _record = record?;
//! }
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod bench;
pub mod checksum;
pub mod codec;
mod error;
pub mod fault;
mod format;
mod log;
pub mod record;
pub mod recovery;

pub use checksum::{crc32, Checksum};
pub use error::{DecodeError, LogError};
pub use format::{Format, ParseFormatError};
pub use log::{AppendReceipt, LogHandle};
pub use record::{BenchObject, BenchRecord, PayloadShape};
pub use recovery::{replay, ReplayCursor, TerminalKind, TerminalStatus};
