//! CRC-32/ISO-HDLC (the zlib/PNG/Ethernet CRC) over frame payloads.

use std::fmt;

/// A 32-bit CRC value as stored in a binary frame trailer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Checksum(pub u32);

impl Checksum {
    pub fn value(self) -> u32 {
        self.0
    }
}

impl From<Checksum> for u32 {
    fn from(c: Checksum) -> u32 {
        c.0
    }
}

impl fmt::Display for Checksum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#010x}", self.0)
    }
}

/// Reflected polynomial 0x04C11DB7, init and final xor 0xFFFFFFFF.
pub fn crc32(bytes: &[u8]) -> Checksum {
    Checksum(crc32fast::hash(bytes))
}
