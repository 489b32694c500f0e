//! Reproducible corruption of log files.
//!
//! [`corrupt_bytes`] applies one targeted, seeded mutation to a clean log.
//! Text mutations follow the structure of a JSON object (whitespace,
//! structural symbols, fields, values); binary mutations aim at MessagePack
//! headers, keys, values and the checksum trailer. [`expected_outcome`]
//! holds the observed result of each kind, and [`observe`] classifies what
//! a replay of the damaged file actually produced so the two can be
//! compared.
//!
//! [`flip_sweep`] and [`truncation_sweep`] generalize this into exhaustive
//! checks over every byte offset of a small file.

use std::fmt;
use std::fs;
use std::io;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{DeserializeOwned, IgnoredAny};
use serde::Serialize;

use crate::codec::msgpack::{self, Role};
use crate::recovery::ReplayCursor;
use crate::{Format, TerminalKind, TerminalStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StraySymbol {
    OpenBrace,
    CloseBrace,
    OpenBracket,
    CloseBracket,
}

impl StraySymbol {
    pub const ALL: [StraySymbol; 4] = [
        StraySymbol::OpenBrace,
        StraySymbol::CloseBrace,
        StraySymbol::OpenBracket,
        StraySymbol::CloseBracket,
    ];

    pub fn byte(self) -> u8 {
        match self {
            StraySymbol::OpenBrace => b'{',
            StraySymbol::CloseBrace => b'}',
            StraySymbol::OpenBracket => b'[',
            StraySymbol::CloseBracket => b']',
        }
    }

    fn from_byte(b: u8) -> Option<Self> {
        StraySymbol::ALL.into_iter().find(|s| s.byte() == b)
    }
}

/// Mutations of a JSON log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TextCorruption {
    WhitespaceNoise,
    StraySymbol(StraySymbol),
    AddUnknownField,
    RemoveField,
    RenameField,
    ReorderFields,
    EmptyObject,
    MutateValueSameType,
    MutateValueWrongType,
}

/// Mutations of a checksummed MessagePack log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryCorruption {
    MutateObjectHeader,
    MutateFieldIdentifier,
    MutateFieldValue,
    MutateChecksumHeader,
    MutateChecksumValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorruptionKind {
    Text(TextCorruption),
    Binary(BinaryCorruption),
}

impl TextCorruption {
    pub const ALL: [TextCorruption; 9] = [
        TextCorruption::WhitespaceNoise,
        TextCorruption::StraySymbol(StraySymbol::OpenBracket),
        TextCorruption::AddUnknownField,
        TextCorruption::RemoveField,
        TextCorruption::RenameField,
        TextCorruption::ReorderFields,
        TextCorruption::EmptyObject,
        TextCorruption::MutateValueSameType,
        TextCorruption::MutateValueWrongType,
    ];
}

impl BinaryCorruption {
    pub const ALL: [BinaryCorruption; 5] = [
        BinaryCorruption::MutateObjectHeader,
        BinaryCorruption::MutateFieldIdentifier,
        BinaryCorruption::MutateFieldValue,
        BinaryCorruption::MutateChecksumHeader,
        BinaryCorruption::MutateChecksumValue,
    ];
}

impl CorruptionKind {
    pub fn format(self) -> Format {
        match self {
            CorruptionKind::Text(_) => Format::Text,
            CorruptionKind::Binary(_) => Format::Binary,
        }
    }

    /// Every kind, with each stray symbol listed separately.
    pub fn all() -> Vec<CorruptionKind> {
        let mut kinds: Vec<_> = TextCorruption::ALL
            .iter()
            .flat_map(|&k| match k {
                TextCorruption::StraySymbol(_) => StraySymbol::ALL.iter().map(|&s| TextCorruption::StraySymbol(s)).collect(),
                other => vec![other],
            })
            .map(CorruptionKind::Text)
            .collect();
        kinds.extend(BinaryCorruption::ALL.iter().map(|&k| CorruptionKind::Binary(k)));
        kinds
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use BinaryCorruption as B;
        use TextCorruption as T;
        let name = match *self {
            CorruptionKind::Text(T::StraySymbol(s)) => return write!(f, "stray-symbol:{}", s.byte() as char),
            CorruptionKind::Text(T::WhitespaceNoise) => "whitespace-noise",
            CorruptionKind::Text(T::AddUnknownField) => "add-unknown-field",
            CorruptionKind::Text(T::RemoveField) => "remove-field",
            CorruptionKind::Text(T::RenameField) => "rename-field",
            CorruptionKind::Text(T::ReorderFields) => "reorder-fields",
            CorruptionKind::Text(T::EmptyObject) => "empty-object",
            CorruptionKind::Text(T::MutateValueSameType) => "mutate-value-same-type",
            CorruptionKind::Text(T::MutateValueWrongType) => "mutate-value-wrong-type",
            CorruptionKind::Binary(B::MutateObjectHeader) => "mutate-object-header",
            CorruptionKind::Binary(B::MutateFieldIdentifier) => "mutate-field-identifier",
            CorruptionKind::Binary(B::MutateFieldValue) => "mutate-field-value",
            CorruptionKind::Binary(B::MutateChecksumHeader) => "mutate-checksum-header",
            CorruptionKind::Binary(B::MutateChecksumValue) => "mutate-checksum-value",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown corruption kind {0:?}")]
pub struct ParseKindError(String);

impl FromStr for CorruptionKind {
    type Err = ParseKindError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let normalized = s.trim().to_ascii_lowercase().replace('_', "-");
        if normalized == "stray-symbol" {
            return Ok(CorruptionKind::Text(TextCorruption::StraySymbol(StraySymbol::OpenBracket)));
        }
        if let Some(sym) = normalized.strip_prefix("stray-symbol:") {
            return match sym.as_bytes() {
                [b] => StraySymbol::from_byte(*b)
                    .map(|s| CorruptionKind::Text(TextCorruption::StraySymbol(s)))
                    .ok_or_else(|| ParseKindError(s.to_owned())),
                _ => Err(ParseKindError(s.to_owned())),
            };
        }
        CorruptionKind::all()
            .into_iter()
            .find(|k| k.to_string() == normalized)
            .ok_or_else(|| ParseKindError(s.to_owned()))
    }
}

/// One mutation to apply: what, to which record (0-based), and the seed
/// that picks positions and replacement bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub record_index: usize,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, record_index: usize, seed: u64) -> Self {
        CorruptionSpec { kind, record_index, seed }
    }

    pub fn format(&self) -> Format {
        self.kind.format()
    }

    pub fn expected(&self) -> Outcome {
        expected_outcome(self.kind, self.record_index)
    }
}

/// What a replay of a damaged file yields, relative to the records that
/// were originally written. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Every original record, unchanged, and a clean end.
    Recovered,
    /// Exactly the records before this index, then a terminal error.
    DetectedAt(usize),
    /// Every record and a clean end, but the record at this index differs
    /// from what was written.
    SilentlyAltered(usize),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Recovered => f.write_str("recovered"),
            Outcome::DetectedAt(i) => write!(f, "detected at record {i}"),
            Outcome::SilentlyAltered(i) => write!(f, "record {i} silently altered"),
        }
    }
}

/// The outcome each kind of damage produces when applied to `record_index`.
pub fn expected_outcome(kind: CorruptionKind, record_index: usize) -> Outcome {
    use TextCorruption as T;
    match kind {
        CorruptionKind::Text(T::WhitespaceNoise | T::AddUnknownField | T::ReorderFields) => Outcome::Recovered,
        CorruptionKind::Text(T::MutateValueSameType) => Outcome::SilentlyAltered(record_index),
        CorruptionKind::Text(
            T::StraySymbol(_) | T::RemoveField | T::RenameField | T::EmptyObject | T::MutateValueWrongType,
        ) => Outcome::DetectedAt(record_index),
        CorruptionKind::Binary(_) => Outcome::DetectedAt(record_index),
    }
}

/// Classifies a replay result against the original records. `Err` describes
/// results that fit no outcome, such as a non-prefix or several altered
/// records.
pub fn observe<T: PartialEq>(original: &[T], recovered: &[T], status: &TerminalStatus) -> Result<Outcome, String> {
    if status.is_clean() {
        if recovered.len() != original.len() {
            return Err(format!(
                "clean end after {} records, {} were written",
                recovered.len(),
                original.len()
            ));
        }
        let altered: Vec<usize> = (0..original.len()).filter(|&i| recovered[i] != original[i]).collect();
        return match altered[..] {
            [] => Ok(Outcome::Recovered),
            [i] => Ok(Outcome::SilentlyAltered(i)),
            _ => Err(format!("records {altered:?} altered")),
        };
    }
    if recovered.len() > original.len() || recovered != &original[..recovered.len()] {
        return Err(format!("{} records recovered, not a prefix of the original", recovered.len()));
    }
    Ok(Outcome::DetectedAt(recovered.len()))
}

#[derive(Debug, thiserror::Error)]
pub enum FaultError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("input does not replay cleanly: {0:?}")]
    NotClean(TerminalKind),
    #[error("record {index} out of range, file holds {records} records")]
    RecordOutOfRange { index: usize, records: usize },
    #[error("corruption `{kind}` needs a {} file, got {format}", .kind.format())]
    FormatMismatch { kind: CorruptionKind, format: Format },
    #[error("record {index} offers no target for `{kind}`")]
    NoTarget { kind: CorruptionKind, index: usize },
}

/// Byte span of every frame in a clean log. Text spans cover the JSON value
/// only, not surrounding whitespace.
pub fn frame_spans(bytes: &[u8], format: Format) -> Result<Vec<Range<usize>>, FaultError> {
    let mut cursor = ReplayCursor::<IgnoredAny, _>::new(bytes, format);
    let mut spans = Vec::new();
    while let Some(frame) = cursor.next_frame() {
        match frame {
            Ok(f) => spans.push(f.offset as usize..(f.offset + f.len) as usize),
            Err(_) => break,
        }
    }
    match cursor.terminal() {
        Some(status) if status.is_clean() => Ok(spans),
        Some(status) => Err(FaultError::NotClean(status.kind.clone())),
        None => unreachable!("cursor drained"),
    }
}

/// Applies `spec` to a clean log held in memory, returning the damaged copy.
pub fn corrupt_bytes(bytes: &[u8], spec: &CorruptionSpec) -> Result<Vec<u8>, FaultError> {
    let spans = frame_spans(bytes, spec.format())?;
    let span = spans
        .get(spec.record_index)
        .cloned()
        .ok_or(FaultError::RecordOutOfRange {
            index: spec.record_index,
            records: spans.len(),
        })?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let record = &bytes[span.clone()];
    let no_target = || FaultError::NoTarget {
        kind: spec.kind,
        index: spec.record_index,
    };
    let replacement = match spec.kind {
        CorruptionKind::Text(kind) => mutate_text(record, kind, &mut rng).ok_or_else(no_target)?,
        CorruptionKind::Binary(kind) => mutate_binary(record, kind, &mut rng).ok_or_else(no_target)?,
    };
    let mut out = Vec::with_capacity(bytes.len() + replacement.len());
    out.extend_from_slice(&bytes[..span.start]);
    out.extend_from_slice(&replacement);
    out.extend_from_slice(&bytes[span.end..]);
    Ok(out)
}

/// Applies `spec` to the log at `input`, writing the result to `output`.
/// `input` and `output` may be the same path for an in-place edit.
pub fn corrupt(input: &Path, output: &Path, spec: &CorruptionSpec) -> Result<(), FaultError> {
    let bytes = fs::read(input)?;
    let damaged = corrupt_bytes(&bytes, spec)?;
    fs::write(output, damaged)?;
    Ok(())
}

fn replace_byte(old: u8, rng: &mut ChaCha8Rng) -> u8 {
    old.wrapping_add(rng.gen_range(1..=255u8))
}

fn mutate_binary(frame: &[u8], kind: BinaryCorruption, rng: &mut ChaCha8Rng) -> Option<Vec<u8>> {
    let (tokens, payload_len) = msgpack::tokens(frame).ok()?;
    let mut positions: Vec<usize> = Vec::new();
    match kind {
        BinaryCorruption::MutateObjectHeader => positions.extend(0..tokens[0].header_len),
        BinaryCorruption::MutateFieldIdentifier => {
            positions.extend(tokens.iter().filter(|t| t.role == Role::Key).flat_map(|t| t.span()))
        }
        BinaryCorruption::MutateFieldValue => positions.extend(
            tokens
                .iter()
                .filter(|t| matches!(t.role, Role::Value | Role::Element) && !t.kind.is_container())
                .flat_map(|t| t.span()),
        ),
        BinaryCorruption::MutateChecksumHeader => positions.push(payload_len),
        BinaryCorruption::MutateChecksumValue => {
            positions.extend(payload_len + 1..frame.len());
            // A positive-fixint checksum is its own header.
            if positions.is_empty() {
                positions.push(payload_len);
            }
        }
    }
    positions.retain(|&p| p < frame.len());
    let &pos = positions.choose(rng)?;
    let mut out = frame.to_vec();
    out[pos] = replace_byte(out[pos], rng);
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lex {
    Punct(u8),
    Str,
    Num,
    Lit,
}

#[derive(Debug, Clone, Copy)]
struct JsonToken {
    lex: Lex,
    start: usize,
    end: usize,
    /// Nesting depth of the token; the root object's braces are at 0.
    depth: usize,
}

/// Tokenizes one JSON value. Returns `None` on input it cannot lex.
fn lex_json(src: &[u8]) -> Option<Vec<JsonToken>> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut i = 0;
    while i < src.len() {
        let b = src[i];
        let start = i;
        let lex = match b {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'{' | b'[' => {
                out.push(JsonToken { lex: Lex::Punct(b), start, end: i + 1, depth });
                depth += 1;
                i += 1;
                continue;
            }
            b'}' | b']' => {
                depth = depth.checked_sub(1)?;
                i += 1;
                Lex::Punct(b)
            }
            b':' | b',' => {
                i += 1;
                Lex::Punct(b)
            }
            b'"' => {
                i += 1;
                while *src.get(i)? != b'"' {
                    i += if src[i] == b'\\' { 2 } else { 1 };
                }
                i += 1;
                Lex::Str
            }
            b'-' | b'0'..=b'9' => {
                while i < src.len() && matches!(src[i], b'-' | b'+' | b'.' | b'e' | b'E' | b'0'..=b'9') {
                    i += 1;
                }
                Lex::Num
            }
            b'a'..=b'z' => {
                while i < src.len() && src[i].is_ascii_alphabetic() {
                    i += 1;
                }
                Lex::Lit
            }
            _ => return None,
        };
        out.push(JsonToken { lex, start, end: i, depth });
    }
    Some(out)
}

fn is_key(tokens: &[JsonToken], i: usize) -> bool {
    tokens[i].lex == Lex::Str && matches!(tokens.get(i + 1), Some(t) if t.lex == Lex::Punct(b':'))
}

/// Byte spans of the root object's members, each from key to end of value.
fn top_level_members(tokens: &[JsonToken]) -> Vec<Range<usize>> {
    let mut members = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    for (i, t) in tokens.iter().enumerate() {
        if t.depth == 1 && t.lex == Lex::Punct(b',') {
            members.extend(current.take().map(|(s, e)| s..e));
        } else if t.depth == 0 {
            if t.lex == Lex::Punct(b'}') {
                members.extend(current.take().map(|(s, e)| s..e));
            }
        } else {
            match current.as_mut() {
                Some((_, end)) => *end = t.end,
                None if t.depth == 1 && is_key(tokens, i) => current = Some((t.start, t.end)),
                None => {}
            }
        }
    }
    members
}

fn splice(src: &[u8], range: Range<usize>, with: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(src.len() + with.len());
    out.extend_from_slice(&src[..range.start]);
    out.extend_from_slice(with);
    out.extend_from_slice(&src[range.end..]);
    out
}

fn mutate_text(record: &[u8], kind: TextCorruption, rng: &mut ChaCha8Rng) -> Option<Vec<u8>> {
    let tokens = lex_json(record)?;
    let root_is_object = tokens.first().map(|t| t.lex) == Some(Lex::Punct(b'{'));
    match kind {
        TextCorruption::WhitespaceNoise => {
            let mut points: Vec<usize> = tokens.iter().flat_map(|t| [t.start, t.end]).collect();
            points.sort_unstable();
            points.dedup();
            let count = rng.gen_range(1..=3).min(points.len());
            let mut chosen: Vec<usize> = points.choose_multiple(rng, count).copied().collect();
            chosen.sort_unstable_by(|a, b| b.cmp(a));
            let mut out = record.to_vec();
            for p in chosen {
                let noise: Vec<u8> = (0..rng.gen_range(1..=4))
                    .map(|_| *[b' ', b'\t', b'\n', b'\r'].choose(rng).unwrap())
                    .collect();
                out.splice(p..p, noise);
            }
            Some(out)
        }
        TextCorruption::StraySymbol(sym) => Some(splice(record, 0..0, &[sym.byte()])),
        TextCorruption::EmptyObject => Some(b"{}".to_vec()),
        TextCorruption::AddUnknownField => {
            if !root_is_object {
                return None;
            }
            let keys: Vec<&[u8]> = (0..tokens.len())
                .filter(|&i| tokens[i].depth == 1 && is_key(&tokens, i))
                .map(|i| &record[tokens[i].start + 1..tokens[i].end - 1])
                .collect();
            let name = loop {
                let candidate = format!("x{:04x}", rng.gen::<u16>());
                if !keys.contains(&candidate.as_bytes()) {
                    break candidate;
                }
            };
            let value = match rng.gen_range(0..5) {
                0 => rng.gen::<u32>().to_string(),
                1 => format!("\"{}\"", rng.gen::<u32>()),
                2 => "[1,2,3]".to_owned(),
                3 => "{\"k\":null}".to_owned(),
                _ => "true".to_owned(),
            };
            let comma = if keys.is_empty() { "" } else { "," };
            let field = format!("\"{name}\":{value}{comma}");
            let at = tokens[0].end;
            Some(splice(record, at..at, field.as_bytes()))
        }
        TextCorruption::RemoveField => {
            let members = top_level_members(&tokens);
            let i = rng.gen_range(0..members.len().max(1));
            let victim = members.get(i)?.clone();
            let range = match (members.get(i + 1), i.checked_sub(1).map(|p| &members[p])) {
                (Some(next), _) => victim.start..next.start,
                (None, Some(prev)) => prev.end..victim.end,
                (None, None) => victim,
            };
            Some(splice(record, range, b""))
        }
        TextCorruption::RenameField => {
            let keys: Vec<JsonToken> = (0..tokens.len()).filter(|&i| is_key(&tokens, i)).map(|i| tokens[i]).collect();
            let key = *keys.choose(rng)?;
            let inner = key.start + 1..key.end - 1;
            let letters: Vec<usize> = inner.clone().filter(|&p| record[p].is_ascii_alphanumeric()).collect();
            let mut out = record.to_vec();
            match letters.choose(rng) {
                Some(&p) => {
                    let old = out[p];
                    out[p] = loop {
                        let c = rng.gen_range(b'a'..=b'z');
                        if c != old {
                            break c;
                        }
                    };
                }
                None => out.insert(inner.start, b'q'),
            }
            Some(out)
        }
        TextCorruption::ReorderFields => {
            let members = top_level_members(&tokens);
            if members.len() < 2 {
                return None;
            }
            let mut order: Vec<usize> = (0..members.len()).collect();
            order.shuffle(rng);
            if order.iter().enumerate().all(|(i, &j)| i == j) {
                order.rotate_left(1);
            }
            let mut out = record[..members[0].start].to_vec();
            for (slot, &j) in order.iter().enumerate() {
                out.extend_from_slice(&record[members[j].clone()]);
                let sep_end = members.get(slot + 1).map_or(record.len(), |m| m.start);
                out.extend_from_slice(&record[members[slot].end..sep_end]);
            }
            Some(out)
        }
        TextCorruption::MutateValueSameType => {
            let numbers: Vec<JsonToken> = tokens
                .iter()
                .filter(|t| t.lex == Lex::Num && record[t.start..t.end].iter().all(u8::is_ascii_digit))
                .copied()
                .collect();
            let t = *numbers.choose(rng)?;
            let old: u64 = std::str::from_utf8(&record[t.start..t.end]).ok()?.parse().ok()?;
            // Smaller values fit any unsigned type that held the original.
            let new = if old == 0 { rng.gen_range(1..=9) } else { rng.gen_range(0..old) };
            Some(splice(record, t.start..t.end, new.to_string().as_bytes()))
        }
        TextCorruption::MutateValueWrongType => {
            let leaves: Vec<JsonToken> = (0..tokens.len())
                .filter(|&i| matches!(tokens[i].lex, Lex::Num | Lex::Lit) || (tokens[i].lex == Lex::Str && !is_key(&tokens, i)))
                .map(|i| tokens[i])
                .collect();
            let t = *leaves.choose(rng)?;
            let original = &record[t.start..t.end];
            let with: Vec<u8> = match t.lex {
                Lex::Num => match rng.gen_range(0..3) {
                    0 => [b"\"", original, b"\""].concat(),
                    1 => b"true".to_vec(),
                    _ => b"[]".to_vec(),
                },
                Lex::Str => {
                    if rng.gen_bool(0.5) {
                        b"0".to_vec()
                    } else {
                        b"false".to_vec()
                    }
                }
                _ => b"\"x\"".to_vec(),
            };
            Some(splice(record, t.start..t.end, &with))
        }
    }
}

/// Which replacement values [`flip_sweep`] tries at each offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Each of the 8 single-bit flips.
    BitFlips,
    /// All 255 other byte values.
    AllByteValues,
}

impl SweepMode {
    fn replacements(self, original: u8) -> Vec<u8> {
        match self {
            SweepMode::BitFlips => (0..8).map(|bit| original ^ (1 << bit)).collect(),
            SweepMode::AllByteValues => (1..=255u8).map(|d| original.wrapping_add(d)).collect(),
        }
    }
}

/// Per-offset line of a sweep report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OffsetSummary {
    pub offset: usize,
    pub frame: usize,
    pub mutations: usize,
    /// Replays that stopped exactly at the containing frame.
    pub detected_at_frame: usize,
    /// Replays that stopped safely but before the containing frame.
    pub detected_earlier: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepFailure {
    pub offset: usize,
    pub original: u8,
    pub replacement: u8,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SweepReport {
    pub file_len: usize,
    pub frames: usize,
    pub mutations: usize,
    pub prefix_safe: usize,
    pub detected_at_frame: usize,
    pub failures: Vec<SweepFailure>,
    pub offsets: Vec<OffsetSummary>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Writes the per-offset summary as CSV.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.offsets {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mutates every byte of a clean binary log in turn, replays each damaged
/// copy in memory, and checks that the replay is prefix safe: it ends in an
/// error, yields only unmodified records, and stops no later than the frame
/// that holds the mutated byte.
pub fn flip_sweep<T>(bytes: &[u8], mode: SweepMode) -> Result<SweepReport, FaultError>
where
    T: DeserializeOwned + PartialEq,
{
    let spans = frame_spans(bytes, Format::Binary)?;
    let (original, _) = ReplayCursor::<T, _>::new(bytes, Format::Binary).drain();
    let mut report = SweepReport {
        file_len: bytes.len(),
        frames: spans.len(),
        ..SweepReport::default()
    };
    let mut work = bytes.to_vec();
    let mut frame = 0;
    for offset in 0..bytes.len() {
        while spans[frame].end <= offset {
            frame += 1;
        }
        let before = work[offset];
        let mut summary = OffsetSummary {
            offset,
            frame,
            mutations: 0,
            detected_at_frame: 0,
            detected_earlier: 0,
            failures: 0,
        };
        for replacement in mode.replacements(before) {
            work[offset] = replacement;
            let (recovered, status) = ReplayCursor::<T, _>::new(&work[..], Format::Binary).drain();
            summary.mutations += 1;
            let verdict = match observe(&original, &recovered, &status) {
                Ok(Outcome::DetectedAt(k)) if k == frame => Ok(true),
                Ok(Outcome::DetectedAt(k)) if k < frame => Ok(false),
                Ok(Outcome::DetectedAt(k)) => Err(format!("damage in frame {frame} detected only at record {k}")),
                Ok(other) => Err(format!("undetected: {other}")),
                Err(e) => Err(e),
            };
            match verdict {
                Ok(exact) => {
                    report.prefix_safe += 1;
                    if exact {
                        summary.detected_at_frame += 1;
                        report.detected_at_frame += 1;
                    } else {
                        summary.detected_earlier += 1;
                    }
                }
                Err(reason) => {
                    summary.failures += 1;
                    report.failures.push(SweepFailure {
                        offset,
                        original: before,
                        replacement,
                        reason,
                    });
                }
            }
        }
        work[offset] = before;
        report.mutations += summary.mutations;
        report.offsets.push(summary);
    }
    Ok(report)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TruncationReport {
    pub cuts: usize,
    pub clean: usize,
    pub truncated: usize,
    pub corrupt: usize,
    /// Cut lengths whose replay was not a prefix of the original records.
    pub violations: Vec<(usize, String)>,
}

impl TruncationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Replays every prefix `bytes[..cut]` of a clean log, for each cut from 0
/// to the full length, and checks that each yields a prefix of the
/// original records.
pub fn truncation_sweep<T>(bytes: &[u8], format: Format) -> Result<TruncationReport, FaultError>
where
    T: DeserializeOwned + PartialEq,
{
    let (original, status) = ReplayCursor::<T, _>::new(bytes, format).drain();
    if !status.is_clean() {
        return Err(FaultError::NotClean(status.kind));
    }
    let mut report = TruncationReport::default();
    for cut in 0..=bytes.len() {
        let (recovered, status) = ReplayCursor::<T, _>::new(&bytes[..cut], format).drain();
        report.cuts += 1;
        match status.kind {
            TerminalKind::CleanEnd => report.clean += 1,
            TerminalKind::Truncated { .. } => report.truncated += 1,
            TerminalKind::Corrupt { .. } => report.corrupt += 1,
        }
        let is_prefix = recovered.len() <= original.len() && recovered == original[..recovered.len()];
        if !is_prefix {
            report.violations.push((cut, format!("{} records, not a prefix", recovered.len())));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::encode_into;
    use crate::{BenchRecord, PayloadShape};

    fn log(format: Format, n: u32) -> (Vec<u8>, Vec<BenchRecord>) {
        let mut bytes = Vec::new();
        let records: Vec<_> = (0..n)
            .map(|i| BenchRecord::generate(i * 1_000 + 17, PayloadShape { comment_length: 8, objects_per_record: 2 }))
            .collect();
        for r in &records {
            encode_into(format, r, &mut bytes).unwrap();
        }
        (bytes, records)
    }

    fn outcome_of(bytes: &[u8], format: Format, original: &[BenchRecord]) -> Outcome {
        let (recovered, status) = ReplayCursor::<BenchRecord, _>::new(bytes, format).drain();
        observe(original, &recovered, &status).unwrap()
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in CorruptionKind::all() {
            assert_eq!(kind.to_string().parse::<CorruptionKind>(), Ok(kind));
        }
        assert_eq!(
            "stray-symbol".parse::<CorruptionKind>(),
            Ok(CorruptionKind::Text(TextCorruption::StraySymbol(StraySymbol::OpenBracket)))
        );
        assert_eq!(
            "MUTATE_CHECKSUM_VALUE".parse::<CorruptionKind>(),
            Ok(CorruptionKind::Binary(BinaryCorruption::MutateChecksumValue))
        );
        assert!("stray-symbol:x".parse::<CorruptionKind>().is_err());
        assert!("explode".parse::<CorruptionKind>().is_err());
    }

    #[test]
    fn expected_table() {
        use TextCorruption as T;
        assert_eq!(expected_outcome(CorruptionKind::Text(T::ReorderFields), 4), Outcome::Recovered);
        assert_eq!(expected_outcome(CorruptionKind::Text(T::EmptyObject), 4), Outcome::DetectedAt(4));
        assert_eq!(expected_outcome(CorruptionKind::Text(T::MutateValueSameType), 2), Outcome::SilentlyAltered(2));
        assert_eq!(
            expected_outcome(CorruptionKind::Binary(BinaryCorruption::MutateFieldIdentifier), 0),
            Outcome::DetectedAt(0)
        );
    }

    #[test]
    fn lexer_finds_members() {
        let rec = br#"{"id":1,"comment":"a,b}","objects":[{"a":1,"b":2}]}"#;
        let tokens = lex_json(rec).unwrap();
        let members: Vec<&[u8]> = top_level_members(&tokens).into_iter().map(|r| &rec[r]).collect();
        assert_eq!(members, [&b"\"id\":1"[..], b"\"comment\":\"a,b}\"", b"\"objects\":[{\"a\":1,\"b\":2}]"]);
    }

    #[test]
    fn reorder_changes_bytes_but_not_content() {
        let (bytes, records) = log(Format::Text, 5);
        for seed in 0..20 {
            let spec = CorruptionSpec::new(CorruptionKind::Text(TextCorruption::ReorderFields), 2, seed);
            let damaged = corrupt_bytes(&bytes, &spec).unwrap();
            assert_ne!(damaged, bytes);
            assert_eq!(damaged.len(), bytes.len());
            assert_eq!(outcome_of(&damaged, Format::Text, &records), Outcome::Recovered);
        }
    }

    #[test]
    fn remove_field_handles_first_middle_last() {
        let (bytes, _) = log(Format::Text, 1);
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..40 {
            let spec = CorruptionSpec::new(CorruptionKind::Text(TextCorruption::RemoveField), 0, seed);
            let damaged = corrupt_bytes(&bytes, &spec).unwrap();
            let text = String::from_utf8(damaged).unwrap();
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v.as_object().unwrap().len(), 2, "{text}");
            seen.insert(text);
        }
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn same_type_mutation_stays_valid_json_and_shorter_or_equal() {
        let (bytes, records) = log(Format::Text, 4);
        for seed in 0..30 {
            let spec = CorruptionSpec::new(CorruptionKind::Text(TextCorruption::MutateValueSameType), 3, seed);
            let damaged = corrupt_bytes(&bytes, &spec).unwrap();
            assert!(damaged.len() <= bytes.len());
            assert_eq!(outcome_of(&damaged, Format::Text, &records), Outcome::SilentlyAltered(3));
        }
    }

    #[test]
    fn whitespace_noise_only_inserts_whitespace() {
        let (bytes, records) = log(Format::Text, 3);
        for seed in 0..30 {
            let spec = CorruptionSpec::new(CorruptionKind::Text(TextCorruption::WhitespaceNoise), 1, seed);
            let damaged = corrupt_bytes(&bytes, &spec).unwrap();
            assert!(damaged.len() > bytes.len());
            let stripped: Vec<u8> = damaged.iter().copied().filter(|b| !b" \t\r\n".contains(b)).collect();
            let original: Vec<u8> = bytes.iter().copied().filter(|b| !b" \t\r\n".contains(b)).collect();
            assert_eq!(stripped, original);
            assert_eq!(outcome_of(&damaged, Format::Text, &records), Outcome::Recovered);
        }
    }

    #[test]
    fn mutations_stay_inside_the_target_record() {
        for kind in CorruptionKind::all() {
            let format = kind.format();
            let (bytes, _) = log(format, 6);
            let spans = frame_spans(&bytes, format).unwrap();
            let target = 3;
            for seed in 0..5 {
                let damaged = corrupt_bytes(&bytes, &CorruptionSpec::new(kind, target, seed)).unwrap();
                assert_ne!(damaged, bytes, "{kind}");
                let head = spans[target].start;
                let tail = bytes.len() - spans[target].end;
                assert_eq!(&damaged[..head], &bytes[..head], "{kind}");
                assert_eq!(&damaged[damaged.len() - tail..], &bytes[bytes.len() - tail..], "{kind}");
            }
        }
    }

    #[test]
    fn corrupt_is_deterministic_per_seed() {
        for kind in CorruptionKind::all() {
            let (bytes, _) = log(kind.format(), 4);
            let spec = CorruptionSpec::new(kind, 1, 99);
            assert_eq!(corrupt_bytes(&bytes, &spec).unwrap(), corrupt_bytes(&bytes, &spec).unwrap(), "{kind}");
        }
    }

    #[test]
    fn out_of_range_and_unclean_inputs_are_rejected() {
        let (bytes, _) = log(Format::Binary, 3);
        let spec = CorruptionSpec::new(CorruptionKind::Binary(BinaryCorruption::MutateFieldValue), 3, 0);
        assert!(matches!(
            corrupt_bytes(&bytes, &spec),
            Err(FaultError::RecordOutOfRange { index: 3, records: 3 })
        ));
        let spec = CorruptionSpec::new(CorruptionKind::Text(TextCorruption::EmptyObject), 0, 0);
        assert!(matches!(corrupt_bytes(&bytes, &spec), Err(FaultError::NotClean(_))));
    }

    #[test]
    fn every_kind_matches_its_expected_outcome() {
        for kind in CorruptionKind::all() {
            let (bytes, records) = log(kind.format(), 8);
            for target in [0, 4, 7] {
                for seed in 0..10 {
                    let spec = CorruptionSpec::new(kind, target, seed);
                    let damaged = corrupt_bytes(&bytes, &spec).unwrap();
                    assert_eq!(outcome_of(&damaged, kind.format(), &records), spec.expected(), "{kind} record {target} seed {seed}");
                }
            }
        }
    }

    #[test]
    fn observe_rejects_non_prefix() {
        let (_, records) = log(Format::Binary, 3);
        let status = TerminalStatus {
            kind: TerminalKind::Truncated { offset: 0 },
            records_recovered: 1,
        };
        assert!(observe(&records, &records[1..2], &status).is_err());
        let clean = TerminalStatus { kind: TerminalKind::CleanEnd, records_recovered: 3 };
        let mut altered = records.clone();
        altered[0].id += 1;
        altered[2].id += 1;
        assert!(observe(&records, &altered, &clean).is_err());
    }

    #[test]
    fn sweeps_of_empty_file_are_trivial() {
        let report = flip_sweep::<BenchRecord>(&[], SweepMode::AllByteValues).unwrap();
        assert_eq!(report.mutations, 0);
        assert!(report.passed());
        let report = truncation_sweep::<BenchRecord>(&[], Format::Binary).unwrap();
        assert_eq!((report.cuts, report.clean), (1, 1));
    }

    #[test]
    fn bit_flip_sweep_detects_at_containing_frame() {
        let (bytes, _) = log(Format::Binary, 4);
        let report = flip_sweep::<BenchRecord>(&bytes, SweepMode::BitFlips).unwrap();
        assert!(report.passed(), "{:?}", report.failures.first());
        assert_eq!(report.mutations, bytes.len() * 8);
        assert_eq!(report.detected_at_frame, report.mutations);
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("offset,frame,mutations,detected_at_frame,detected_earlier,failures\n"));
        assert_eq!(text.lines().count(), bytes.len() + 1);
    }

    #[test]
    fn truncation_sweep_counts_boundaries() {
        let (bytes, _) = log(Format::Binary, 5);
        let report = truncation_sweep::<BenchRecord>(&bytes, Format::Binary).unwrap();
        assert!(report.passed());
        assert_eq!(report.clean, 6);
        assert_eq!(report.truncated, bytes.len() + 1 - 6);
        assert_eq!(report.corrupt, 0);
    }
}
