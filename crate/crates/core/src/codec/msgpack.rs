//! Structural scanning of MessagePack values.
//!
//! Serialization itself goes through `rmp-serde`; this module only knows
//! how many bytes a value occupies and which bytes play which role. The
//! binary decoder uses [`read_value`] to find the exact payload boundary
//! without trusting a length prefix, and fault injection uses [`tokens`] to
//! aim mutations at headers, keys and values.

use std::io::{self, BufRead};

/// Type family of a MessagePack marker byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Nil,
    Bool,
    Int,
    Float,
    Str,
    Bin,
    Array,
    Map,
    Ext,
}

impl Kind {
    pub fn is_container(self) -> bool {
        matches!(self, Kind::Array | Kind::Map)
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    /// Fixed number of bytes after the marker.
    Fixed(u64),
    /// Big-endian length of `len_bytes` bytes, then that many body bytes
    /// (plus one type byte for ext).
    Sized { len_bytes: u8, extra: u64 },
    /// Inline element count.
    FixContainer { count: u64, per_entry: u64 },
    /// Big-endian element count of `len_bytes` bytes.
    Container { len_bytes: u8, per_entry: u64 },
}

fn classify(marker: u8) -> Option<(Kind, Shape)> {
    use Shape::*;
    let entry = match marker {
        0x00..=0x7f | 0xe0..=0xff => (Kind::Int, Fixed(0)),
        0x80..=0x8f => (Kind::Map, FixContainer { count: u64::from(marker & 0x0f), per_entry: 2 }),
        0x90..=0x9f => (Kind::Array, FixContainer { count: u64::from(marker & 0x0f), per_entry: 1 }),
        0xa0..=0xbf => (Kind::Str, Fixed(u64::from(marker & 0x1f))),
        0xc0 => (Kind::Nil, Fixed(0)),
        0xc1 => return None,
        0xc2 | 0xc3 => (Kind::Bool, Fixed(0)),
        0xc4 => (Kind::Bin, Sized { len_bytes: 1, extra: 0 }),
        0xc5 => (Kind::Bin, Sized { len_bytes: 2, extra: 0 }),
        0xc6 => (Kind::Bin, Sized { len_bytes: 4, extra: 0 }),
        0xc7 => (Kind::Ext, Sized { len_bytes: 1, extra: 1 }),
        0xc8 => (Kind::Ext, Sized { len_bytes: 2, extra: 1 }),
        0xc9 => (Kind::Ext, Sized { len_bytes: 4, extra: 1 }),
        0xca => (Kind::Float, Fixed(4)),
        0xcb => (Kind::Float, Fixed(8)),
        0xcc | 0xd0 => (Kind::Int, Fixed(1)),
        0xcd | 0xd1 => (Kind::Int, Fixed(2)),
        0xce | 0xd2 => (Kind::Int, Fixed(4)),
        0xcf | 0xd3 => (Kind::Int, Fixed(8)),
        0xd4 => (Kind::Ext, Fixed(2)),
        0xd5 => (Kind::Ext, Fixed(3)),
        0xd6 => (Kind::Ext, Fixed(5)),
        0xd7 => (Kind::Ext, Fixed(9)),
        0xd8 => (Kind::Ext, Fixed(17)),
        0xd9 => (Kind::Str, Sized { len_bytes: 1, extra: 0 }),
        0xda => (Kind::Str, Sized { len_bytes: 2, extra: 0 }),
        0xdb => (Kind::Str, Sized { len_bytes: 4, extra: 0 }),
        0xdc => (Kind::Array, Container { len_bytes: 2, per_entry: 1 }),
        0xdd => (Kind::Array, Container { len_bytes: 4, per_entry: 1 }),
        0xde => (Kind::Map, Container { len_bytes: 2, per_entry: 2 }),
        0xdf => (Kind::Map, Container { len_bytes: 4, per_entry: 2 }),
    };
    Some(entry)
}

fn be_uint(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0u64, |acc, &b| (acc << 8) | u64::from(b))
}

#[derive(Debug)]
pub enum ScanError {
    /// Input ended before the value was complete.
    Eof,
    /// A marker byte that no MessagePack value may start with, or a value of
    /// the wrong kind where an unsigned integer was required.
    Unexpected { marker: u8, position: usize },
    Io(io::Error),
}

impl From<io::Error> for ScanError {
    fn from(e: io::Error) -> Self {
        ScanError::Io(e)
    }
}

fn take<R: BufRead>(src: &mut R, out: &mut Vec<u8>, mut n: u64) -> Result<(), ScanError> {
    while n > 0 {
        let buf = match src.fill_buf() {
            Ok(buf) => buf,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        };
        if buf.is_empty() {
            return Err(ScanError::Eof);
        }
        let k = buf.len().min(usize::try_from(n).unwrap_or(usize::MAX));
        out.extend_from_slice(&buf[..k]);
        src.consume(k);
        n -= k as u64;
    }
    Ok(())
}

fn take_be<R: BufRead>(src: &mut R, out: &mut Vec<u8>, len_bytes: u8) -> Result<u64, ScanError> {
    let start = out.len();
    take(src, out, u64::from(len_bytes))?;
    Ok(be_uint(&out[start..]))
}

/// Reads exactly one complete MessagePack value from `src`, appending its
/// bytes to `out`. Declared lengths are never preallocated, so a corrupted
/// header cannot trigger a huge allocation beyond the bytes actually read.
pub fn read_value<R: BufRead>(src: &mut R, out: &mut Vec<u8>) -> Result<(), ScanError> {
    let base = out.len();
    let mut pending: u64 = 1;
    while pending > 0 {
        pending -= 1;
        let position = out.len() - base;
        take(src, out, 1)?;
        let marker = out[out.len() - 1];
        let (_, shape) = classify(marker).ok_or(ScanError::Unexpected { marker, position })?;
        match shape {
            Shape::Fixed(n) => take(src, out, n)?,
            Shape::Sized { len_bytes, extra } => {
                let len = take_be(src, out, len_bytes)?;
                take(src, out, len + extra)?;
            }
            Shape::FixContainer { count, per_entry } => pending += count * per_entry,
            Shape::Container { len_bytes, per_entry } => {
                let count = take_be(src, out, len_bytes)?;
                pending = pending.saturating_add(count * per_entry);
            }
        }
    }
    Ok(())
}

/// Reads one MessagePack unsigned integer in any of its encodings
/// (positive fixint, uint8/16/32/64), appending its bytes to `out`.
pub fn read_uint<R: BufRead>(src: &mut R, out: &mut Vec<u8>) -> Result<u64, ScanError> {
    let base = out.len();
    take(src, out, 1)?;
    let marker = out[base];
    let width = match marker {
        0x00..=0x7f => return Ok(u64::from(marker)),
        0xcc => 1,
        0xcd => 2,
        0xce => 4,
        0xcf => 8,
        _ => return Err(ScanError::Unexpected { marker, position: 0 }),
    };
    take_be(src, out, width)
}

/// Length in bytes of the single value at the start of `bytes`. `Eof`
/// means `bytes` holds only a prefix of the value.
pub fn scan(bytes: &[u8]) -> Result<usize, ScanError> {
    let end = bytes.len() as u64;
    let mut pos = 0u64;
    let mut pending: u64 = 1;
    let field = |at: u64, width: u8| -> Result<u64, ScanError> {
        let from = at as usize;
        bytes.get(from..from + usize::from(width)).map(be_uint).ok_or(ScanError::Eof)
    };
    while pending > 0 {
        pending -= 1;
        let marker = *bytes.get(pos as usize).ok_or(ScanError::Eof)?;
        let (_, shape) = classify(marker).ok_or(ScanError::Unexpected {
            marker,
            position: pos as usize,
        })?;
        pos += 1;
        match shape {
            Shape::Fixed(n) => pos += n,
            Shape::Sized { len_bytes, extra } => {
                let len = field(pos, len_bytes)?;
                pos += u64::from(len_bytes) + len + extra;
            }
            Shape::FixContainer { count, per_entry } => pending += count * per_entry,
            Shape::Container { len_bytes, per_entry } => {
                let count = field(pos, len_bytes)?;
                pos += u64::from(len_bytes);
                pending = pending.saturating_add(count * per_entry);
            }
        }
        if pos > end {
            return Err(ScanError::Eof);
        }
    }
    Ok(pos as usize)
}

/// Parses one unsigned integer at the start of `bytes`, returning the
/// value and its encoded length.
pub fn parse_uint(bytes: &[u8]) -> Result<(u64, usize), ScanError> {
    let marker = *bytes.first().ok_or(ScanError::Eof)?;
    let width = match marker {
        0x00..=0x7f => return Ok((u64::from(marker), 1)),
        0xcc => 1,
        0xcd => 2,
        0xce => 4,
        0xcf => 8,
        _ => return Err(ScanError::Unexpected { marker, position: 0 }),
    };
    let body = bytes.get(1..1 + width).ok_or(ScanError::Eof)?;
    Ok((be_uint(body), 1 + width))
}

/// Length in bytes of the single value at the start of `bytes`, or `None`
/// if `bytes` does not begin with a complete well-formed value.
pub fn value_len(bytes: &[u8]) -> Option<usize> {
    scan(bytes).ok()
}

/// Position of a value within its parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Root,
    Key,
    Value,
    Element,
}

/// One MessagePack value header (and, for scalars, body) within a buffer.
/// Container tokens cover only their header; their children follow as
/// separate tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub offset: usize,
    pub header_len: usize,
    /// Header plus body; equals `header_len` for containers.
    pub len: usize,
    pub kind: Kind,
    pub role: Role,
    pub depth: usize,
}

impl Token {
    pub fn span(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Flattens the value at the start of `bytes` into tokens in byte order.
/// Returns the tokens and the total length of the value.
pub fn tokens(bytes: &[u8]) -> Result<(Vec<Token>, usize), ScanError> {
    struct Open {
        remaining: u64,
        is_map: bool,
        seen: u64,
    }
    let mut out = Vec::new();
    let mut stack: Vec<Open> = Vec::new();
    let mut pos = 0usize;
    let mut first = true;
    loop {
        while matches!(stack.last(), Some(open) if open.remaining == 0) {
            stack.pop();
        }
        if !first && stack.is_empty() {
            break;
        }
        let role = match stack.last_mut() {
            None => Role::Root,
            Some(open) => {
                open.remaining -= 1;
                open.seen += 1;
                match (open.is_map, open.seen % 2) {
                    (true, 1) => Role::Key,
                    (true, _) => Role::Value,
                    (false, _) => Role::Element,
                }
            }
        };
        first = false;
        let depth = stack.len();
        let marker = *bytes.get(pos).ok_or(ScanError::Eof)?;
        let (kind, shape) = classify(marker).ok_or(ScanError::Unexpected { marker, position: pos })?;
        let need = |n: usize| if pos + n <= bytes.len() { Ok(()) } else { Err(ScanError::Eof) };
        let (header_len, len, children) = match shape {
            Shape::Fixed(n) => {
                let n = n as usize;
                need(1 + n)?;
                (1, 1 + n, None)
            }
            Shape::Sized { len_bytes, extra } => {
                let lb = len_bytes as usize;
                need(1 + lb)?;
                let body = usize::try_from(be_uint(&bytes[pos + 1..pos + 1 + lb]) + extra).map_err(|_| ScanError::Eof)?;
                need(1 + lb + body)?;
                (1 + lb, 1 + lb + body, None)
            }
            Shape::FixContainer { count, per_entry } => (1, 1, Some(count * per_entry)),
            Shape::Container { len_bytes, per_entry } => {
                let lb = len_bytes as usize;
                need(1 + lb)?;
                let count = be_uint(&bytes[pos + 1..pos + 1 + lb]);
                (1 + lb, 1 + lb, Some(count * per_entry))
            }
        };
        out.push(Token {
            offset: pos,
            header_len,
            len,
            kind,
            role,
            depth,
        });
        pos += len;
        if let Some(remaining) = children {
            stack.push(Open {
                remaining,
                is_map: kind == Kind::Map,
                seen: 0,
            });
        }
    }
    Ok((out, pos))
}
