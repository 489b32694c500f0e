//! Batch-size write/read micro-benchmark.
//!
//! A write phase appends `total_records` generated records in
//! `total_records / batch_size` durable batches; the read phase then
//! replays the same file to a clean end. The page cache is not bypassed,
//! so the read phase measures decoding cost. Each phase is timed as a
//! whole with a monotonic clock.

use std::fmt;
use std::fs;
use std::hint::black_box;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::recovery::replay;
use crate::{BenchRecord, Format, LogError, LogHandle, PayloadShape, TerminalKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchConfig {
    pub total_records: u64,
    pub batch_size: u64,
    pub format: Format,
    pub runs: u32,
    pub shape: PayloadShape,
}

impl BenchConfig {
    pub fn new(format: Format, total_records: u64, batch_size: u64) -> Self {
        BenchConfig {
            total_records,
            batch_size,
            format,
            runs: 3,
            shape: PayloadShape::default(),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.batch_size == 0 || self.total_records == 0 {
            return Err(BenchError::Config("total and batch size must be positive".into()));
        }
        if self.total_records % self.batch_size != 0 {
            return Err(BenchError::Config(format!(
                "{} records do not divide into batches of {}",
                self.total_records, self.batch_size
            )));
        }
        if self.total_records > u64::from(u32::MAX) + 1 {
            return Err(BenchError::Config("record ids are 32-bit".into()));
        }
        Ok(())
    }

    fn file_name(&self) -> String {
        format!("bench-{}-b{}.wal", self.format, self.batch_size)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid benchmark configuration: {0}")]
    Config(String),
    #[error("write phase aborted after {written} records: {source}")]
    Write {
        written: u64,
        #[source]
        source: LogError,
    },
    #[error("read phase failed: {0}")]
    Read(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Write,
    Read,
}

/// Run number, or the mean over all runs of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunId {
    Run(u32),
    Mean,
}

impl fmt::Display for RunId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunId::Run(i) => write!(f, "{i}"),
            RunId::Mean => f.write_str("mean"),
        }
    }
}

impl FromStr for RunId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "mean" {
            Ok(RunId::Mean)
        } else {
            s.parse().map(RunId::Run)
        }
    }
}

impl Serialize for RunId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RunId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

mod format_serde {
    use super::Format;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(f: &Format, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(f.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Format, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One CSV row: a single timed phase, or a per-configuration mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    #[serde(with = "format_serde")]
    pub format: Format,
    pub batch_size: u64,
    pub total_records: u64,
    pub phase: Phase,
    pub run: RunId,
    pub elapsed_s: f64,
    pub mb_per_s: f64,
    pub rec_per_s: f64,
    pub file_bytes: u64,
}

impl BenchRow {
    fn measured(config: &BenchConfig, phase: Phase, run: u32, elapsed_s: f64, file_bytes: u64) -> Self {
        BenchRow {
            format: config.format,
            batch_size: config.batch_size,
            total_records: config.total_records,
            phase,
            run: RunId::Run(run),
            elapsed_s,
            mb_per_s: file_bytes as f64 / 1e6 / elapsed_s,
            rec_per_s: config.total_records as f64 / elapsed_s,
            file_bytes,
        }
    }
}

/// The deterministic benchmark record for `index`.
pub fn generate_record(index: u32, shape: PayloadShape) -> BenchRecord {
    BenchRecord::generate(index, shape)
}

/// Writes the configured population to `path`, which is truncated first.
pub fn run_write_phase(config: &BenchConfig, run: u32, path: &Path) -> Result<BenchRow, BenchError> {
    config.validate()?;
    fs::File::create(path)?;
    let mut log =
        LogHandle::<BenchRecord>::open(path, config.format).map_err(|source| BenchError::Write { written: 0, source })?;
    let batches = config.total_records / config.batch_size;
    let mut batch = Vec::with_capacity(config.batch_size as usize);
    let mut written = 0u64;

    let start = Instant::now();
    for b in 0..batches {
        batch.clear();
        let first = b * config.batch_size;
        batch.extend((first..first + config.batch_size).map(|i| generate_record(i as u32, config.shape)));
        log.append_batch(&batch)
            .map_err(|source| BenchError::Write { written, source })?;
        written += config.batch_size;
    }
    let elapsed = start.elapsed().as_secs_f64();

    log.close().map_err(|source| BenchError::Write { written, source })?;
    let file_bytes = fs::metadata(path)?.len();
    Ok(BenchRow::measured(config, Phase::Write, run, elapsed, file_bytes))
}

/// Replays `path` to a clean end, failing on any other terminal status or
/// a record count that differs from the configuration.
pub fn run_read_phase(config: &BenchConfig, run: u32, path: &Path) -> Result<BenchRow, BenchError> {
    config.validate()?;
    let file_bytes = fs::metadata(path)?.len();

    let start = Instant::now();
    let mut cursor = replay::<BenchRecord>(path, config.format)?;
    let mut count = 0u64;
    let mut fold = 0u64;
    for record in cursor.by_ref() {
        let record = record.map_err(|e| BenchError::Read(e.to_string()))?;
        fold = fold.wrapping_add(u64::from(record.id)).wrapping_add(record.objects.len() as u64);
        count += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    black_box(fold);

    match cursor.terminal().map(|t| &t.kind) {
        Some(TerminalKind::CleanEnd) => {}
        other => return Err(BenchError::Read(format!("replay did not end cleanly: {other:?}"))),
    }
    if count != config.total_records {
        return Err(BenchError::Read(format!(
            "replayed {count} records, wrote {}",
            config.total_records
        )));
    }
    Ok(BenchRow::measured(config, Phase::Read, run, elapsed, file_bytes))
}

/// Runs every configuration `runs` times (write then read each run),
/// using files under `dir`. Returns the per-run rows in execution order.
pub fn run_benchmark(configs: &[BenchConfig], dir: &Path) -> Result<Vec<BenchRow>, BenchError> {
    let mut rows = Vec::new();
    for config in configs {
        config.validate()?;
        let path: PathBuf = dir.join(config.file_name());
        for run in 0..config.runs {
            rows.push(run_write_phase(config, run, &path)?);
            rows.push(run_read_phase(config, run, &path)?);
        }
        fs::remove_file(&path)?;
    }
    Ok(rows)
}

/// Arithmetic mean of the run rows of each (format, batch size, total,
/// phase) group, in order of first appearance.
pub fn mean_rows(rows: &[BenchRow]) -> Vec<BenchRow> {
    let mut groups: Vec<(BenchRow, Vec<&BenchRow>)> = Vec::new();
    for row in rows.iter().filter(|r| r.run != RunId::Mean) {
        let key = |r: &BenchRow| (r.format, r.batch_size, r.total_records, r.phase);
        match groups.iter_mut().find(|(g, _)| key(g) == key(row)) {
            Some((_, members)) => members.push(row),
            None => groups.push((row.clone(), vec![row])),
        }
    }
    groups
        .into_iter()
        .map(|(template, members)| {
            let n = members.len() as f64;
            let mean = |f: fn(&BenchRow) -> f64| members.iter().map(|r| f(r)).sum::<f64>() / n;
            BenchRow {
                run: RunId::Mean,
                elapsed_s: mean(|r| r.elapsed_s),
                mb_per_s: mean(|r| r.mb_per_s),
                rec_per_s: mean(|r| r.rec_per_s),
                file_bytes: (members.iter().map(|r| r.file_bytes as f64).sum::<f64>() / n).round() as u64,
                ..template
            }
        })
        .collect()
}

/// Median of `f` over the run rows matching the given group.
pub fn median_of(rows: &[BenchRow], format: Format, batch_size: u64, phase: Phase, f: fn(&BenchRow) -> f64) -> Option<f64> {
    let mut values: Vec<f64> = rows
        .iter()
        .filter(|r| r.run != RunId::Mean && r.format == format && r.batch_size == batch_size && r.phase == phase)
        .map(f)
        .collect();
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    })
}

/// Writes the run rows followed by their mean rows as CSV.
pub fn emit_report<W: io::Write>(rows: &[BenchRow], out: W) -> Result<(), BenchError> {
    if rows.is_empty() {
        return Err(BenchError::Config("no completed runs to report".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    let runs = rows.iter().filter(|r| r.run != RunId::Mean);
    for row in runs.clone() {
        w.serialize(row)?;
    }
    for row in mean_rows(&runs.cloned().collect::<Vec<_>>()) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a report written by [`emit_report`].
pub fn load_report<R: io::Read>(input: R) -> Result<Vec<BenchRow>, BenchError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(Into::into)
}
