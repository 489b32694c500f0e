//! Line-delimited JSON frames.
//!
//! The writer emits `<object>\n` per record with fields in declaration
//! order. The reader is tolerant: any JSON whitespace may separate or pad
//! records, fields may appear in any order, and unknown fields are
//! ignored. Missing fields, wrong-typed values (including out-of-range
//! numbers), duplicate keys and stray structural characters are errors.
//!
//! There is no checksum. A value changed to another value of the same type
//! decodes without complaint.

use std::io::{self, BufRead};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::Tracked;
use crate::{DecodeError, LogError};

pub(crate) fn encode_into<T: Serialize>(record: &T, out: &mut Vec<u8>) -> Result<(), LogError> {
    let start = out.len();
    if let Err(e) = serde_json::to_writer(&mut *out, record) {
        out.truncate(start);
        return Err(LogError::Encode(e.to_string()));
    }
    out.push(b'\n');
    Ok(())
}

fn is_json_whitespace(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r')
}

/// Consumes leading whitespace. Returns `false` at end of input.
fn skip_whitespace<R: BufRead>(src: &mut Tracked<R>) -> io::Result<bool> {
    loop {
        let buf = match src.fill_buf() {
            Ok(buf) => buf,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        if buf.is_empty() {
            return Ok(false);
        }
        let skip = buf.iter().take_while(|&&b| is_json_whitespace(b)).count();
        let more = skip < buf.len();
        src.consume(skip);
        if more {
            return Ok(true);
        }
    }
}

/// Decodes the next JSON value from `src` as a `T`, returning it with the
/// offset where the value starts. `Ok(None)` if only whitespace remains.
pub fn decode<T, R>(src: &mut Tracked<R>) -> Result<Option<(u64, T)>, DecodeError>
where
    T: DeserializeOwned,
    R: BufRead,
{
    let offset = src.position();
    match skip_whitespace(src) {
        Ok(true) => {}
        Ok(false) => return Ok(None),
        Err(e) => return Err(DecodeError::io(offset, &e)),
    }
    let offset = src.position();
    let mut de = serde_json::Deserializer::from_reader(&mut *src);
    T::deserialize(&mut de).map(|r| Some((offset, r))).map_err(|e| classify(offset, e))
}

fn classify(offset: u64, err: serde_json::Error) -> DecodeError {
    use serde_json::error::Category;
    match err.classify() {
        Category::Eof => DecodeError::TruncatedFrame { offset },
        Category::Syntax => DecodeError::MalformedValue {
            offset,
            detail: err.to_string(),
        },
        Category::Data => DecodeError::SchemaMismatch {
            offset,
            detail: err.to_string(),
        },
        Category::Io => DecodeError::Io {
            offset,
            kind: err.io_error_kind().unwrap_or(io::ErrorKind::Other),
            detail: err.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{BenchObject, BenchRecord};
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Figure {
        compact: bool,
        schema: u32,
    }

    fn encode(r: &impl Serialize) -> Vec<u8> {
        let mut out = Vec::new();
        encode_into(r, &mut out).unwrap();
        out
    }

    fn decode_all<T: DeserializeOwned>(bytes: &[u8]) -> (Vec<T>, Option<DecodeError>) {
        let mut src = Tracked::new(bytes);
        let mut out = Vec::new();
        loop {
            match decode(&mut src) {
                Ok(Some((_, r))) => out.push(r),
                Ok(None) => return (out, None),
                Err(e) => return (out, Some(e)),
            }
        }
    }

    fn sample(id: u32) -> BenchRecord {
        BenchRecord {
            id,
            comment: format!("note {id}"),
            objects: vec![BenchObject { a: id, b: 7 }],
        }
    }

    #[test]
    fn figure_encodes_to_27_bytes_plus_terminator() {
        let frame = encode(&Figure { compact: true, schema: 0 });
        assert_eq!(&frame[..], b"{\"compact\":true,\"schema\":0}\n");
        assert_eq!(frame.len() - 1, 27);
    }

    #[test]
    fn empty_list_encodes_as_brackets() {
        let r = BenchRecord { id: 1, comment: String::new(), objects: vec![] };
        assert_eq!(encode(&r), b"{\"id\":1,\"comment\":\"\",\"objects\":[]}\n");
    }

    #[test]
    fn control_characters_are_escaped() {
        let r = BenchRecord { id: 1, comment: "a\nb\t\u{1}".into(), objects: vec![] };
        let frame = encode(&r);
        assert_eq!(frame.iter().filter(|&&b| b < 0x20).count(), 1);
        assert_eq!(*frame.last().unwrap(), b'\n');
        assert_eq!(decode_all::<BenchRecord>(&frame).0, vec![r]);
    }

    #[test]
    fn tolerates_arbitrary_whitespace() {
        let input = b"\n\t {\"id\" :1,\n\"comment\":\"note 1\",\t\"objects\":[ {\"a\":1,\"b\":7} ]}\n\n\n\t\t{\"id\":2,\"comment\":\"note 2\",\"objects\":[{\"a\":2,\"b\":7}]}  \r\n";
        let (records, err) = decode_all::<BenchRecord>(input);
        assert_eq!(err, None);
        assert_eq!(records, vec![sample(1), sample(2)]);
    }

    #[test]
    fn reordered_fields_and_unknown_fields_decode() {
        let input = br#"{"objects":[{"b":7,"extra":[1,2],"a":3}],"zzz":{"k":null},"comment":"note 3","id":3}"#;
        let (records, err) = decode_all::<BenchRecord>(input);
        assert_eq!(err, None);
        assert_eq!(records, vec![sample(3)]);
    }

    #[test]
    fn stray_bracket_between_records_fails_at_that_offset() {
        for sym in [b'[', b']', b'{', b'}'] {
            let mut input = encode(&sample(1));
            let offset = input.len();
            input.push(sym);
            input.extend(encode(&sample(2)));
            let (records, err) = decode_all::<BenchRecord>(&input);
            assert_eq!(records, vec![sample(1)]);
            let err = err.unwrap();
            assert_eq!(err.offset(), offset as u64, "{}: {err}", sym as char);
            assert!(!err.is_truncation());
        }
    }

    #[test]
    fn missing_renamed_and_empty_are_schema_errors() {
        for input in [
            &br#"{"id":1,"comment":"x"}"#[..],
            br#"{"iq":1,"comment":"x","objects":[]}"#,
            br#"{}"#,
            br#"{"id":1,"comment":"x","objects":[{"a":1}]}"#,
        ] {
            let (records, err) = decode_all::<BenchRecord>(input);
            assert!(records.is_empty());
            assert!(matches!(err, Some(DecodeError::SchemaMismatch { offset: 0, .. })), "{err:?}");
        }
    }

    #[test]
    fn wrong_type_values_are_schema_errors() {
        for input in [
            &br#"{"id":-1,"comment":"x","objects":[]}"#[..],
            br#"{"id":4294967296,"comment":"x","objects":[]}"#,
            br#"{"id":"1","comment":"x","objects":[]}"#,
            br#"{"id":1.5,"comment":"x","objects":[]}"#,
            br#"{"id":1,"comment":7,"objects":[]}"#,
            br#"{"id":1,"comment":"x","objects":null}"#,
        ] {
            let (_, err) = decode_all::<BenchRecord>(input);
            assert!(matches!(err, Some(DecodeError::SchemaMismatch { .. })), "{}", String::from_utf8_lossy(input));
        }
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let (records, err) = decode_all::<BenchRecord>(br#"{"id":1,"id":2,"comment":"x","objects":[]}"#);
        assert!(records.is_empty());
        assert!(matches!(err, Some(DecodeError::SchemaMismatch { .. })));
    }

    #[test]
    fn same_type_value_change_is_not_detected() {
        let mut input = encode(&sample(5));
        let pos = input.iter().position(|&b| b == b'5').unwrap();
        input[pos] = b'6';
        let (records, err) = decode_all::<BenchRecord>(&input);
        assert_eq!(err, None);
        assert_eq!(records[0].id, 6);
    }

    #[test]
    fn invalid_utf8_is_malformed() {
        let mut input = encode(&sample(1));
        let pos = input.iter().position(|&b| b == b'n').unwrap();
        input[pos] = 0xff;
        let (_, err) = decode_all::<BenchRecord>(&input);
        assert!(matches!(err, Some(DecodeError::MalformedValue { .. })), "{err:?}");
    }

    #[test]
    fn cut_inside_object_is_truncation() {
        let input = encode(&sample(1));
        for cut in 1..input.len() - 1 {
            let (records, err) = decode_all::<BenchRecord>(&input[..cut]);
            assert!(records.is_empty());
            assert_eq!(err, Some(DecodeError::TruncatedFrame { offset: 0 }), "cut {cut}");
        }
        let (records, err) = decode_all::<BenchRecord>(&input[..input.len() - 1]);
        assert_eq!((records.len(), err), (1, None));
    }

    #[test]
    fn decoder_stops_exactly_after_the_object() {
        let mut input = encode(&sample(1));
        let first = input.len() - 1;
        input.extend(encode(&sample(2)));
        let mut src = Tracked::new(&input[..]);
        let (offset, r): (u64, BenchRecord) = decode(&mut src).unwrap().unwrap();
        assert_eq!((offset, r), (0, sample(1)));
        assert_eq!(src.position(), first as u64);
    }
}
