//! `cstore`: generate synthetic datasets, move them between the flat-file
//! and object-store backends, run the magnitude-histogram analysis, and
//! sweep the benchmark scenarios into CSV.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or format
//! error, 3 store or system error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cstore_core::backend::{
    read_file_backend, write_file_backend, CommitOptions, FileWriteOptions, MappingKind,
};
use cstore_core::bench::{self, BenchConfig, Scenario};
use cstore_core::codec::{CodecId, DEFAULT_ZSTD_LEVEL};
use cstore_core::store::{CostModel, QueuePolicy, SessionOptions};
use cstore_core::workload::{
    self, HistogramSpec, ImportOptions, DEFAULT_COLUMNS, DEFAULT_READ_COLUMNS,
};
use cstore_core::{Error, Result};

#[derive(Parser)]
#[command(name = "cstore", version, about = "Columnar dataset engine with flat-file and simulated object-store backends")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic float dataset and write it as a flat file.
    Generate(GenerateArgs),
    /// Import a dataset into an object-store directory.
    Import(ImportArgs),
    /// Histogram the per-entry magnitude of the leading float columns.
    Analyze(AnalyzeArgs),
    /// Sweep the benchmark scenarios across page sizes into CSV.
    Bench(BenchArgs),
    /// Print Target/Baseline speedups from a sweep CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of entries.
    #[arg(long)]
    entries: u64,
    /// Number of float64 columns.
    #[arg(long, default_value_t = DEFAULT_COLUMNS)]
    columns: u32,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Page size target in bytes (KiB/MiB suffixes accepted).
    #[arg(long, value_parser = parse_size, default_value = "64KiB")]
    page_size: u64,
    /// Entries per cluster.
    #[arg(long, default_value_t = 100_000)]
    cluster_entries: u64,
    /// Page codec.
    #[arg(long, value_parser = CodecId::parse, default_value = "none")]
    codec: CodecId,
    /// Compression level when the codec is zstd.
    #[arg(long, default_value_t = DEFAULT_ZSTD_LEVEL)]
    zstd_level: i32,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["file", "entries"]))]
struct ImportArgs {
    /// Store directory (created if missing, must not already hold a dataset).
    #[arg(long)]
    store: PathBuf,
    /// Import this flat-file dataset.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Generate and import a synthetic dataset with this many entries.
    #[arg(long)]
    entries: Option<u64>,
    /// Columns of the generated dataset.
    #[arg(long, default_value_t = DEFAULT_COLUMNS)]
    columns: u32,
    /// Seed of the generated dataset.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Page size target in bytes.
    #[arg(long, value_parser = parse_size, default_value = "64KiB")]
    page_size: u64,
    /// Entries per cluster.
    #[arg(long, default_value_t = 100_000)]
    cluster_entries: u64,
    /// Page-to-object key mapping.
    #[arg(long, value_parser = MappingKind::parse, default_value = "locality-driven")]
    mapping: MappingKind,
    /// Issue each cluster's writes as one concurrent dispatch.
    #[arg(long, value_parser = parse_switch, action = clap::ArgAction::Set, default_value = "on")]
    vector_writes: bool,
    /// Splice page groups into blocks of at most this size.
    #[arg(long, value_parser = parse_size)]
    target_block_size: Option<u64>,
    /// Page codec.
    #[arg(long, value_parser = CodecId::parse, default_value = "none")]
    codec: CodecId,
    /// Compression level when the codec is zstd.
    #[arg(long, default_value_t = DEFAULT_ZSTD_LEVEL)]
    zstd_level: i32,
    /// Cost model overrides, e.g. per_call_latency=5e-5,parallel_lanes=4.
    #[arg(long)]
    cost_model: Option<String>,
    /// Queue creation policy of the simulated store.
    #[arg(long, value_parser = parse_queue, default_value = "persistent")]
    queue: QueuePolicy,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["store", "file"]))]
struct AnalyzeArgs {
    /// Analyze this object-store directory.
    #[arg(long)]
    store: Option<PathBuf>,
    /// Analyze this flat-file dataset.
    #[arg(long)]
    file: Option<PathBuf>,
    /// How many leading columns feed the magnitude.
    #[arg(long, default_value_t = DEFAULT_READ_COLUMNS)]
    read_columns: u32,
    /// Histogram bin count.
    #[arg(long, default_value_t = 100)]
    bins: u32,
    /// Histogram lower edge.
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    /// Histogram upper edge.
    #[arg(long, default_value_t = 5.0)]
    hi: f64,
    /// Write the histogram CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cost model overrides (store analyses only).
    #[arg(long)]
    cost_model: Option<String>,
    /// Queue creation policy (store analyses only).
    #[arg(long, value_parser = parse_queue, default_value = "persistent")]
    queue: QueuePolicy,
}

#[derive(Args)]
struct BenchArgs {
    /// Entries of the generated dataset.
    #[arg(long, default_value_t = 100_000)]
    entries: u64,
    /// Columns of the generated dataset.
    #[arg(long, default_value_t = DEFAULT_COLUMNS)]
    columns: u32,
    /// How many leading columns the read phase fetches.
    #[arg(long, default_value_t = DEFAULT_READ_COLUMNS)]
    read_columns: u32,
    /// Page sizes to sweep, comma separated (default 16KiB..1024KiB ticks).
    #[arg(long, value_parser = parse_size, value_delimiter = ',')]
    page_size: Vec<u64>,
    /// Entries per cluster.
    #[arg(long, default_value_t = 100_000)]
    cluster_entries: u64,
    /// Codecs to sweep, comma separated.
    #[arg(long, value_parser = CodecId::parse, value_delimiter = ',', default_value = "none")]
    codec: Vec<CodecId>,
    /// Compression level when a codec is zstd.
    #[arg(long, default_value_t = DEFAULT_ZSTD_LEVEL)]
    zstd_level: i32,
    /// Scenarios to run: `all` or a comma list of
    /// baseline,object-per-page,locality-driven,target.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    scenario: Vec<String>,
    /// Repeats per configuration.
    #[arg(long, default_value_t = 5)]
    repeats: u32,
    /// Generator and jitter seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cost model overrides, e.g. bandwidth=1e9.
    #[arg(long)]
    cost_model: Option<String>,
    /// Deterministic ±5% spread on per-call latency across repeats.
    #[arg(long, value_parser = parse_switch, action = clap::ArgAction::Set, default_value = "off")]
    jitter: bool,
    /// Block size the Target scenario splices to.
    #[arg(long, value_parser = parse_size, default_value = "1MiB")]
    target_block_size: u64,
    /// Scratch directory for per-run stores (default: a temp dir).
    #[arg(long)]
    store: Option<PathBuf>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep CSV produced by `bench`.
    csv: PathBuf,
    /// Page size of the rows to compare.
    #[arg(long, value_parser = parse_size, default_value = "64KiB")]
    page_size: u64,
}

fn parse_size(s: &str) -> std::result::Result<u64, String> {
    let t = s.trim();
    let digits = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    let (num, suffix) = t.split_at(digits);
    let value: u64 = num.parse().map_err(|_| format!("invalid size `{s}`"))?;
    let unit: u64 = match suffix.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1,
        "k" | "kib" => 1 << 10,
        "m" | "mib" => 1 << 20,
        "g" | "gib" => 1 << 30,
        other => return Err(format!("unknown size suffix `{other}`")),
    };
    value.checked_mul(unit).ok_or_else(|| format!("size `{s}` overflows"))
}

fn parse_switch(s: &str) -> std::result::Result<bool, String> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("expected on|off, got `{other}`")),
    }
}

fn parse_queue(s: &str) -> std::result::Result<QueuePolicy, String> {
    match s {
        "persistent" => Ok(QueuePolicy::Persistent),
        "per-call" => Ok(QueuePolicy::PerCall),
        other => Err(format!("expected persistent|per-call, got `{other}`")),
    }
}

fn cost_model_from(overrides: &Option<String>) -> Result<CostModel> {
    let mut model = CostModel::default();
    if let Some(spec) = overrides {
        model.apply_overrides(spec)?;
    }
    Ok(model)
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let dataset = workload::generate(args.entries, args.columns, args.seed)?;
    let options = FileWriteOptions {
        codec: args.codec,
        zstd_level: args.zstd_level,
        page_size: args.page_size,
        cluster_entries: args.cluster_entries,
    };
    write_file_backend(&dataset, &args.out, &options)?;
    let file_bytes = std::fs::metadata(&args.out)?.len();
    println!(
        "wrote {}: {} entries x {} columns, {} logical bytes, {} file bytes",
        args.out.display(),
        dataset.num_entries,
        args.columns,
        dataset.uncompressed_bytes(),
        file_bytes
    );
    Ok(())
}

fn cmd_import(args: ImportArgs) -> Result<()> {
    let dataset = match (&args.file, args.entries) {
        (Some(path), None) => read_file_backend(path)?,
        (None, Some(entries)) => workload::generate(entries, args.columns, args.seed)?,
        _ => return Err(Error::Config("import needs exactly one of --file or --entries".into())),
    };
    let options = ImportOptions {
        page_size: args.page_size,
        cluster_entries: args.cluster_entries,
        codec: args.codec,
        zstd_level: args.zstd_level,
        commit: CommitOptions {
            mapping: args.mapping,
            vector_writes: args.vector_writes,
            target_block_size: args.target_block_size,
        },
        session: SessionOptions {
            cost_model: cost_model_from(&args.cost_model)?,
            queue_policy: args.queue,
        },
    };
    let report = workload::import(&dataset, &args.store, &options)?;
    println!(
        "imported {} entries ({} logical bytes) into {}: {} store calls, {} stored bytes, {:.6} simulated s, {:.3} GB/s write",
        report.entries,
        report.logical_bytes,
        args.store.display(),
        report.store_calls,
        report.bytes_written,
        report.simulated_seconds,
        report.write_throughput / 1e9
    );
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let spec = HistogramSpec { bins: args.bins, lo: args.lo, hi: args.hi };
    let (hist, summary) = match (&args.store, &args.file) {
        (Some(dir), None) => {
            if !dir.is_dir() {
                return Err(Error::Store(format!("store directory {} does not exist", dir.display())));
            }
            let session = SessionOptions {
                cost_model: cost_model_from(&args.cost_model)?,
                queue_policy: args.queue,
            };
            let (hist, report) = workload::analyze_store(dir, args.read_columns, spec, session)?;
            (
                hist,
                format!(
                    "analyzed {} entries: {} store calls, {} stored bytes read, {:.6} simulated s, {:.3} GB/s read",
                    report.entries,
                    report.store_calls,
                    report.bytes_read,
                    report.simulated_seconds,
                    report.read_throughput / 1e9
                ),
            )
        }
        (None, Some(path)) => {
            let (hist, bytes_read) = workload::analyze_file(path, args.read_columns, spec)?;
            (hist, format!("analyzed {}: {} stored bytes read", path.display(), bytes_read))
        }
        _ => return Err(Error::Config("analyze needs exactly one of --store or --file".into())),
    };
    let csv = hist.to_csv();
    match &args.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    eprintln!("{summary}");
    Ok(())
}

fn scenarios_from(names: &[String], block_size: u64) -> Result<Vec<Scenario>> {
    if names.iter().any(|n| n == "all") {
        if names.len() != 1 {
            return Err(Error::Config("`all` cannot be combined with other scenarios".into()));
        }
        return Ok(Scenario::all(block_size));
    }
    names.iter().map(|n| Scenario::parse(n, block_size)).collect()
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let (scratch_guard, scratch_root) = match &args.store {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            (None, dir.clone())
        }
        None => {
            let dir = tempfile::tempdir()?;
            let path = dir.path().to_path_buf();
            (Some(dir), path)
        }
    };
    let mut config = BenchConfig::new(args.entries, scratch_root);
    config.columns = args.columns;
    config.read_columns = args.read_columns;
    config.cluster_entries = args.cluster_entries;
    if !args.page_size.is_empty() {
        config.page_sizes = args.page_size.clone();
    }
    config.scenarios = scenarios_from(&args.scenario, args.target_block_size)?;
    config.codecs = args.codec.clone();
    config.zstd_level = args.zstd_level;
    config.repeats = args.repeats;
    config.seed = args.seed;
    config.cost_model = cost_model_from(&args.cost_model)?;
    config.jitter = args.jitter;
    let records = bench::run_sweep(&config)?;
    let csv = bench::to_csv(&records);
    match &args.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    drop(scratch_guard);
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let csv = std::fs::read_to_string(&args.csv)?;
    for row in bench::report_compare(&csv, args.page_size)? {
        println!(
            "page_size={} codec={}: Target/Baseline write {:.1}x, read {:.1}x",
            row.page_size, row.codec, row.write_speedup, row.read_speedup
        );
    }
    if args.page_size == 64 << 10 {
        println!("reference ratios (measured on real hardware at 64 KiB pages): write 9x, read 4.3x");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Import(args) => cmd_import(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 1,
        Error::Schema(_) | Error::Format(_) | Error::Integrity(_) | Error::NotFound { .. } => 2,
        Error::Store(_) | Error::Request(_) | Error::Io(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
