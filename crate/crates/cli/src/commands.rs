use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use replaywal::bench::{self, BenchConfig, Phase};
use replaywal::codec::binary::RawFrames;
use replaywal::fault::{self, CorruptionSpec, SweepMode};
use replaywal::recovery::replay;
use replaywal::{BenchRecord, Format, PayloadShape, TerminalKind, TerminalStatus};

use crate::{BenchArgs, BenchFormatArg, Command, CorruptArgs, SweepModeArg};

const USAGE: u8 = 2;
const DETECTED: u8 = 1;

pub fn run(command: Command) -> Result<ExitCode> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Dump { format, raw, file } => {
            let format = Format::from(format);
            if raw {
                if format != Format::Binary {
                    eprintln!("error: --raw applies to binary files only");
                    return Ok(ExitCode::from(USAGE));
                }
                dump_raw(&file, &mut out)?;
            } else {
                dump(&file, format, &mut out)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { format, file } => verify(&file, format.into(), &mut out),
        Command::Corrupt(args) => corrupt(args, &mut out),
        Command::Sweep {
            input,
            report,
            mode,
            max_bytes,
        } => sweep(&input, report.as_deref(), mode, max_bytes, &mut out),
        Command::Bench(args) => run_bench(args, &mut out),
    }
}

fn summary(r: &BenchRecord) -> String {
    const SHOWN: usize = 24;
    let mut comment: String = r.comment.chars().take(SHOWN).collect();
    if r.comment.chars().count() > SHOWN {
        comment.push_str("...");
    }
    format!("id={} comment={:?} objects={}", r.id, comment, r.objects.len())
}

fn status_line(status: &TerminalStatus) -> String {
    let n = status.records_recovered;
    match &status.kind {
        TerminalKind::CleanEnd => format!("{n} records, clean end"),
        TerminalKind::Corrupt { offset, cause } => format!("{n} records, corrupt at offset {offset}: {cause}"),
        TerminalKind::Truncated { offset } => format!("{n} records, truncated tail at offset {offset}"),
    }
}

fn dump(file: &Path, format: Format, out: &mut impl Write) -> Result<()> {
    let mut cursor = replay::<BenchRecord>(file, format).with_context(|| format!("cannot read {}", file.display()))?;
    while let Some(Ok(frame)) = cursor.next_frame() {
        writeln!(out, "#{} @{} len={} {}", frame.index, frame.offset, frame.len, summary(&frame.record))?;
    }
    let status = cursor.terminal().expect("cursor drained");
    writeln!(out, "{}", status_line(status))?;
    Ok(())
}

fn dump_raw(file: &Path, out: &mut impl Write) -> Result<()> {
    let reader = BufReader::new(File::open(file).with_context(|| format!("cannot read {}", file.display()))?);
    let mut frames = RawFrames::new(reader);
    let mut count = 0u64;
    let mut end = None;
    for (i, frame) in frames.by_ref().enumerate() {
        match frame {
            Ok(f) => {
                let preview: String = f.payload.iter().take(16).map(|b| format!("{b:02x}")).collect();
                writeln!(
                    out,
                    "#{i} @{} payload={}B crc stored={:#010x} computed={:#010x} {} {preview}{}",
                    f.offset,
                    f.payload.len(),
                    f.stored,
                    f.computed,
                    if f.checksum_ok() { "ok" } else { "MISMATCH" },
                    if f.payload.len() > 16 { "..." } else { "" },
                )?;
                count += 1;
            }
            Err(e) => end = Some(e),
        }
    }
    match end {
        None => writeln!(out, "{count} frames, clean end")?,
        Some(e) if e.is_truncation() => writeln!(out, "{count} frames, truncated tail at offset {}", e.offset())?,
        Some(e) => writeln!(out, "{count} frames, unreadable at offset {}: {e}", e.offset())?,
    }
    Ok(())
}

fn verify(file: &Path, format: Format, out: &mut impl Write) -> Result<ExitCode> {
    let cursor = replay::<BenchRecord>(file, format).with_context(|| format!("cannot read {}", file.display()))?;
    let (_, status) = cursor.drain();
    let n = status.records_recovered;
    match &status.kind {
        TerminalKind::CleanEnd => {
            writeln!(out, "ok: {n} records, clean end")?;
            Ok(ExitCode::SUCCESS)
        }
        TerminalKind::Corrupt { offset, cause } => {
            writeln!(out, "corrupt: {n} records recovered, detected at record {n} (offset {offset}): {cause}")?;
            Ok(ExitCode::from(DETECTED))
        }
        TerminalKind::Truncated { offset } => {
            writeln!(out, "truncated tail: {n} records recovered, frame at offset {offset} is incomplete")?;
            Ok(ExitCode::from(DETECTED))
        }
    }
}

fn corrupt(args: CorruptArgs, out: &mut impl Write) -> Result<ExitCode> {
    let format = Format::from(args.format);
    if args.kind.format() != format {
        eprintln!("error: kind `{}` applies to {} files, not {format}", args.kind, args.kind.format());
        return Ok(ExitCode::from(USAGE));
    }
    let spec = CorruptionSpec::new(args.kind, args.record, args.seed);
    let target = if args.in_place { args.input.clone() } else { args.out.clone().expect("clap requires --out") };
    match fault::corrupt(&args.input, &target, &spec) {
        Ok(()) => {}
        Err(e @ (fault::FaultError::RecordOutOfRange { .. } | fault::FaultError::NoTarget { .. })) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(USAGE));
        }
        Err(e) => return Err(e).with_context(|| format!("cannot corrupt {}", args.input.display())),
    }
    writeln!(
        out,
        "wrote {}: {} on record {} (seed {}), expected: {}",
        target.display(),
        spec.kind,
        spec.record_index,
        spec.seed,
        spec.expected()
    )?;
    Ok(ExitCode::SUCCESS)
}

fn sweep(input: &Path, report: Option<&Path>, mode: SweepModeArg, max_bytes: u64, out: &mut impl Write) -> Result<ExitCode> {
    let len = fs::metadata(input).with_context(|| format!("cannot read {}", input.display()))?.len();
    if len > max_bytes {
        eprintln!("error: {} is {len} bytes, sweep limit is {max_bytes} (--max-bytes)", input.display());
        return Ok(ExitCode::from(USAGE));
    }
    let bytes = fs::read(input)?;
    let mode = match mode {
        SweepModeArg::Bytes => SweepMode::AllByteValues,
        SweepModeArg::Bits => SweepMode::BitFlips,
    };
    let result = fault::flip_sweep::<BenchRecord>(&bytes, mode).with_context(|| format!("cannot sweep {}", input.display()))?;
    if let Some(path) = report {
        let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
        result.write_csv(BufWriter::new(file))?;
    }
    writeln!(
        out,
        "{} bytes, {} frames, {} mutations: {} prefix safe ({} at the damaged frame), {} failures",
        result.file_len,
        result.frames,
        result.mutations,
        result.prefix_safe,
        result.detected_at_frame,
        result.failures.len()
    )?;
    for failure in result.failures.iter().take(10) {
        writeln!(
            out,
            "  offset {}: {:#04x} -> {:#04x}: {}",
            failure.offset, failure.original, failure.replacement, failure.reason
        )?;
    }
    Ok(if result.passed() { ExitCode::SUCCESS } else { ExitCode::from(DETECTED) })
}

fn run_bench(args: BenchArgs, out: &mut impl Write) -> Result<ExitCode> {
    let (total, runs) = if args.full_scale { (2_000_000, 5) } else { (args.total, args.runs) };
    if runs == 0 || args.batch.is_empty() {
        bail!("need at least one run and one batch size");
    }
    let formats: &[Format] = match args.format {
        BenchFormatArg::Text => &[Format::Text],
        BenchFormatArg::Bin => &[Format::Binary],
        BenchFormatArg::Both => &[Format::Text, Format::Binary],
    };
    let shape = PayloadShape {
        comment_length: args.comment_len,
        objects_per_record: args.objects,
    };
    let configs: Vec<BenchConfig> = formats
        .iter()
        .flat_map(|&format| {
            args.batch.iter().map(move |&batch_size| BenchConfig {
                total_records: total,
                batch_size,
                format,
                runs,
                shape,
            })
        })
        .collect();
    for config in &configs {
        if let Err(e) = config.validate() {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(USAGE));
        }
    }
    let dir = args.dir.unwrap_or_else(std::env::temp_dir);
    let rows = bench::run_benchmark(&configs, &dir)?;

    match &args.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
            bench::emit_report(&rows, BufWriter::new(file))?;
        }
        None => bench::emit_report(&rows, &mut *out)?,
    }

    let sink: &mut dyn Write = if args.out.is_some() { out } else { &mut io::stderr() };
    writeln!(sink, "{:<5} {:>5} {:>6} {:>10} {:>10} {:>14}", "fmt", "batch", "phase", "time (s)", "MB/s", "rec/s")?;
    for row in bench::mean_rows(&rows) {
        let phase = match row.phase {
            Phase::Write => "write",
            Phase::Read => "read",
        };
        writeln!(
            sink,
            "{:<5} {:>5} {:>6} {:>10.3} {:>10.3} {:>14.2}",
            row.format.to_string(),
            row.batch_size,
            phase,
            row.elapsed_s,
            row.mb_per_s,
            row.rec_per_s
        )?;
    }
    Ok(ExitCode::SUCCESS)
}
