//! The benchmark record schema and its deterministic generator.

use serde::{Deserialize, Serialize};

/// Nested element of [`BenchRecord::objects`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchObject {
    pub a: u32,
    pub b: u32,
}

/// A small record with primitive fields and a list of nested structs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub id: u32,
    pub comment: String,
    pub objects: Vec<BenchObject>,
}

/// Size knobs for generated records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadShape {
    pub comment_length: usize,
    pub objects_per_record: usize,
}

impl Default for PayloadShape {
    fn default() -> Self {
        PayloadShape {
            comment_length: 16,
            objects_per_record: 4,
        }
    }
}

const COMMENT_PATTERN: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
const B_MASK: u32 = 0x5A5A_5A5A;

impl BenchRecord {
    /// Deterministic record for `index`: the same inputs always give the
    /// same record, and distinct indices give distinct ids.
    pub fn generate(index: u32, shape: PayloadShape) -> Self {
        let start = index as usize % COMMENT_PATTERN.len();
        let comment = COMMENT_PATTERN
            .iter()
            .cycle()
            .skip(start)
            .take(shape.comment_length)
            .map(|&c| c as char)
            .collect();
        let objects = (0..shape.objects_per_record)
            .map(|_| BenchObject {
                a: index,
                b: index ^ B_MASK,
            })
            .collect();
        BenchRecord {
            id: index,
            comment,
            objects,
        }
    }
}
