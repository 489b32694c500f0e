use std::fs;

use proptest::prelude::*;
use replaywal::codec::{self, binary};
use replaywal::recovery::ReplayCursor;
use replaywal::{replay, BenchObject, BenchRecord, Format, LogHandle};

fn record() -> impl Strategy<Value = BenchRecord> {
    (
        any::<u32>(),
        prop_oneof![".{0,40}", "[a-z0-9]{0,300}", any::<String>()],
        prop::collection::vec((any::<u32>(), any::<u32>()).prop_map(|(a, b)| BenchObject { a, b }), 0..12),
    )
        .prop_map(|(id, comment, objects)| BenchRecord { id, comment, objects })
}

fn format() -> impl Strategy<Value = Format> {
    prop_oneof![Just(Format::Text), Just(Format::Binary)]
}

proptest! {
    #[test]
    fn concatenated_frames_decode_to_same_records(records in prop::collection::vec(record(), 0..20), format in format()) {
        let mut bytes = Vec::new();
        for r in &records {
            codec::encode_into(format, r, &mut bytes).unwrap();
        }
        let (decoded, status) = ReplayCursor::<BenchRecord, _>::new(&bytes[..], format).drain();
        prop_assert!(status.is_clean());
        prop_assert_eq!(decoded, records);
    }

    #[test]
    fn binary_payload_is_smaller_than_text_frame(r in record()) {
        let payload = binary::encode_payload(&r).unwrap();
        let text = codec::encode(Format::Text, &r).unwrap();
        prop_assert!(payload.len() < text.len(), "{} vs {}", payload.len(), text.len());
    }

    #[test]
    fn encoding_is_deterministic(r in record(), format in format()) {
        prop_assert_eq!(codec::encode(format, &r).unwrap(), codec::encode(format, &r).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Acknowledged bytes never change and replay returns every appended
    /// record in order, across reopen boundaries.
    #[test]
    fn file_is_append_only_and_ordered(
        batches in prop::collection::vec(prop::collection::vec(record(), 1..4), 1..6),
        reopen_every in 1usize..4,
        format in format(),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.wal");
        let mut log = LogHandle::<BenchRecord>::open(&path, format).unwrap();
        let mut acknowledged: Vec<u8> = Vec::new();
        let mut expected = Vec::new();
        for (i, batch) in batches.iter().enumerate() {
            if i > 0 && i % reopen_every == 0 {
                log.close().unwrap();
                log = LogHandle::open(&path, format).unwrap();
            }
            let receipt = log.append_batch(batch).unwrap();
            prop_assert!(receipt.durable);
            let now = fs::read(&path).unwrap();
            prop_assert_eq!(&now[..acknowledged.len()], &acknowledged[..]);
            prop_assert_eq!(now.len() as u64, log.position());
            acknowledged = now;
            expected.extend(batch.iter().cloned());
        }
        log.close().unwrap();
        let (got, status) = replay::<BenchRecord>(&path, format).unwrap().drain();
        prop_assert!(status.is_clean());
        prop_assert_eq!(status.records_recovered as usize, expected.len());
        prop_assert_eq!(got, expected);
    }
}
