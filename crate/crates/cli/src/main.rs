//! `wal`: inspect, verify, damage and benchmark replaywal log files.
//!
//! Exit status is 0 on success, 1 when a file fails verification (or a
//! sweep finds an unsafe replay), and 2 for usage errors and failures to
//! run the command at all.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use replaywal::fault::CorruptionKind;
use replaywal::Format;

#[derive(Debug, Parser)]
#[command(name = "wal", version, about = "Inspect, verify, corrupt and benchmark write-ahead log files")]
struct Cli {
    /// Record schema of the files. Only the built-in benchmark schema is
    /// available; binary files can also be dumped without one (`dump --raw`).
    #[arg(long, global = true, value_enum, default_value_t = Schema::Bench)]
    schema: Schema,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Schema {
    Bench,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Bin,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Text => Format::Text,
            FormatArg::Bin => Format::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchFormatArg {
    Text,
    Bin,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepModeArg {
    /// All 255 replacement values per byte.
    Bytes,
    /// The 8 single-bit flips per byte.
    Bits,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List every record with its offset, then the terminal status.
    Dump {
        #[arg(long, value_enum)]
        format: FormatArg,
        /// Show binary frames without decoding them against a schema.
        #[arg(long)]
        raw: bool,
        file: PathBuf,
    },
    /// Replay a file; exit 0 only if it ends cleanly.
    Verify {
        #[arg(long, value_enum)]
        format: FormatArg,
        file: PathBuf,
    },
    /// Apply one seeded corruption to a record of a clean file.
    Corrupt(CorruptArgs),
    /// Mutate every byte of a small binary file and check each replay.
    Sweep {
        #[arg(long = "in")]
        input: PathBuf,
        /// Per-offset CSV report.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SweepModeArg::Bytes)]
        mode: SweepModeArg,
        /// Refuse inputs larger than this many bytes.
        #[arg(long, default_value_t = 64 * 1024)]
        max_bytes: u64,
    },
    /// Write then replay a generated record population in durable batches.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct CorruptArgs {
    #[arg(long, value_enum)]
    format: FormatArg,
    /// Corruption kind, e.g. `reorder-fields`, `stray-symbol:{` or
    /// `mutate-checksum-value`.
    #[arg(long)]
    kind: CorruptionKind,
    /// 0-based index of the target record.
    #[arg(long)]
    record: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, required_unless_present = "in_place", conflicts_with = "in_place")]
    out: Option<PathBuf>,
    /// Overwrite the input file instead of writing a copy.
    #[arg(long)]
    in_place: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value_t = BenchFormatArg::Both)]
    format: BenchFormatArg,
    #[arg(long, default_value_t = 100_000)]
    total: u64,
    /// Comma-separated batch sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 4])]
    batch: Vec<u64>,
    #[arg(long, default_value_t = 3)]
    runs: u32,
    #[arg(long, default_value_t = 16)]
    comment_len: usize,
    #[arg(long, default_value_t = 4)]
    objects: usize,
    /// Use 2,000,000 records and 5 runs.
    #[arg(long)]
    full_scale: bool,
    /// CSV output; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for the benchmark log files.
    #[arg(long)]
    dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Schema::Bench = cli.schema;
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
