//! Benchmark sweeps. Each run imports the workload dataset into a fresh
//! scratch store and re-reads it through the analysis, under one of four
//! scenarios:
//!
//! * Baseline: object-per-page, per-call queue creation, individual writes.
//! * Current object-per-page: object-per-page, persistent queue, vector
//!   writes.
//! * Current locality-driven: locality-driven, persistent queue, vector
//!   writes.
//! * Target: locality-driven plus scatter-gather splicing into blocks.
//!
//! Throughput is uncompressed logical bytes over simulated seconds. Results
//! are long-format records, one per (scenario, page size, codec, repeat),
//! plus mean/min/max aggregate rows per group in the CSV rendering.

use std::path::PathBuf;

use crate::backend::{CommitOptions, MappingKind};
use crate::codec::CodecId;
use crate::error::{Error, Result};
use crate::store::{CostModel, QueuePolicy, SessionOptions};
use crate::workload::{
    analyze_store, generate, import, mix64, unit_f64, HistogramSpec, ImportOptions,
    DEFAULT_COLUMNS, DEFAULT_READ_COLUMNS,
};

pub const DEFAULT_TARGET_BLOCK_SIZE: u64 = 1 << 20;
pub const DEFAULT_PAGE_SIZES: &[u64] =
    &[16 << 10, 32 << 10, 64 << 10, 128 << 10, 256 << 10, 512 << 10, 1024 << 10];

const CSV_HEADER: &str =
    "scenario,page_size,codec,repeat,write_gbps,read_gbps,store_calls_write,store_calls_read";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    Baseline,
    CurrentObjectPerPage,
    CurrentLocalityDriven,
    Target { block_size: u64 },
}

impl Scenario {
    pub fn all(block_size: u64) -> Vec<Scenario> {
        vec![
            Scenario::Baseline,
            Scenario::CurrentObjectPerPage,
            Scenario::CurrentLocalityDriven,
            Scenario::Target { block_size },
        ]
    }

    pub fn parse(s: &str, block_size: u64) -> Result<Scenario> {
        match s {
            "baseline" => Ok(Scenario::Baseline),
            "object-per-page" => Ok(Scenario::CurrentObjectPerPage),
            "locality-driven" => Ok(Scenario::CurrentLocalityDriven),
            "target" => Ok(Scenario::Target { block_size }),
            other => Err(Error::Config(format!(
                "unknown scenario `{other}` (expected baseline|object-per-page|locality-driven|target)"
            ))),
        }
    }

    /// Data series label used in the CSV.
    pub const fn label(self) -> &'static str {
        match self {
            Scenario::Baseline => "Baseline",
            Scenario::CurrentObjectPerPage => "Current object-per-page",
            Scenario::CurrentLocalityDriven => "Current locality-driven",
            Scenario::Target { .. } => "Target",
        }
    }

    pub const fn slug(self) -> &'static str {
        match self {
            Scenario::Baseline => "baseline",
            Scenario::CurrentObjectPerPage => "opp",
            Scenario::CurrentLocalityDriven => "ld",
            Scenario::Target { .. } => "target",
        }
    }

    pub const fn queue_policy(self) -> QueuePolicy {
        match self {
            Scenario::Baseline => QueuePolicy::PerCall,
            _ => QueuePolicy::Persistent,
        }
    }

    pub const fn commit_options(self) -> CommitOptions {
        match self {
            Scenario::Baseline => CommitOptions {
                mapping: MappingKind::ObjectPerPage,
                vector_writes: false,
                target_block_size: None,
            },
            Scenario::CurrentObjectPerPage => CommitOptions {
                mapping: MappingKind::ObjectPerPage,
                vector_writes: true,
                target_block_size: None,
            },
            Scenario::CurrentLocalityDriven => CommitOptions {
                mapping: MappingKind::LocalityDriven,
                vector_writes: true,
                target_block_size: None,
            },
            Scenario::Target { block_size } => CommitOptions {
                mapping: MappingKind::LocalityDriven,
                vector_writes: true,
                target_block_size: Some(block_size),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub entries: u64,
    pub columns: u32,
    pub read_columns: u32,
    pub cluster_entries: u64,
    pub page_sizes: Vec<u64>,
    pub scenarios: Vec<Scenario>,
    pub codecs: Vec<CodecId>,
    pub zstd_level: i32,
    pub repeats: u32,
    pub seed: u64,
    pub cost_model: CostModel,
    /// Apply a deterministic ±5% spread to per_call_latency across repeats.
    pub jitter: bool,
    pub hist: HistogramSpec,
    /// Scratch stores live here; one per run, removed after the run.
    pub scratch_root: PathBuf,
}

impl BenchConfig {
    pub fn new(entries: u64, scratch_root: PathBuf) -> Self {
        BenchConfig {
            entries,
            columns: DEFAULT_COLUMNS,
            read_columns: DEFAULT_READ_COLUMNS,
            cluster_entries: 100_000,
            page_sizes: DEFAULT_PAGE_SIZES.to_vec(),
            scenarios: Scenario::all(DEFAULT_TARGET_BLOCK_SIZE),
            codecs: vec![CodecId::None],
            zstd_level: crate::codec::DEFAULT_ZSTD_LEVEL,
            repeats: 5,
            seed: 0,
            cost_model: CostModel::default(),
            jitter: false,
            hist: HistogramSpec::default(),
            scratch_root,
        }
    }

    fn validate(&self) -> Result<()> {
        self.cost_model.validate()?;
        if self.page_sizes.is_empty() || self.scenarios.is_empty() || self.codecs.is_empty() {
            return Err(Error::Config("sweep needs page sizes, scenarios and codecs".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("sweep needs at least one repeat".into()));
        }
        if self.read_columns == 0 || self.read_columns > self.columns {
            return Err(Error::Config(format!(
                "cannot read {} of {} columns",
                self.read_columns, self.columns
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRecord {
    pub scenario: Scenario,
    pub page_size: u64,
    pub codec: CodecId,
    pub repeat: u32,
    /// Uncompressed logical GB (1e9 bytes) per simulated second.
    pub write_gbps: f64,
    pub read_gbps: f64,
    pub store_calls_write: u64,
    pub store_calls_read: u64,
}

/// Runs the full sweep. Loop order, and therefore record order, is codec,
/// then page size, then scenario, then repeat.
pub fn run_sweep(config: &BenchConfig) -> Result<Vec<BenchRecord>> {
    config.validate()?;
    let dataset = generate(config.entries, config.columns, config.seed)?;
    std::fs::create_dir_all(&config.scratch_root)?;
    let mut records = Vec::new();
    let mut run_ordinal = 0u64;
    for &codec in &config.codecs {
        for &page_size in &config.page_sizes {
            for &scenario in &config.scenarios {
                for repeat in 0..config.repeats {
                    let mut cost = config.cost_model.clone();
                    if config.jitter {
                        let bits = mix64(config.seed ^ mix64(run_ordinal.wrapping_add(1)));
                        cost.per_call_latency *= 0.95 + 0.10 * unit_f64(bits);
                    }
                    run_ordinal += 1;
                    let session =
                        SessionOptions { cost_model: cost, queue_policy: scenario.queue_policy() };
                    let store = config.scratch_root.join(format!(
                        "run-{}-{}-{}-{}",
                        codec.name(),
                        page_size,
                        scenario.slug(),
                        repeat
                    ));
                    if store.exists() {
                        std::fs::remove_dir_all(&store)?;
                    }
                    let write = import(
                        &dataset,
                        &store,
                        &ImportOptions {
                            page_size,
                            cluster_entries: config.cluster_entries,
                            codec,
                            zstd_level: config.zstd_level,
                            commit: scenario.commit_options(),
                            session: session.clone(),
                        },
                    )?;
                    let (_, read) =
                        analyze_store(&store, config.read_columns, config.hist, session)?;
                    std::fs::remove_dir_all(&store)?;
                    records.push(BenchRecord {
                        scenario,
                        page_size,
                        codec,
                        repeat,
                        write_gbps: write.write_throughput / 1e9,
                        read_gbps: read.read_throughput / 1e9,
                        store_calls_write: write.store_calls,
                        store_calls_read: read.store_calls,
                    });
                }
            }
        }
    }
    Ok(records)
}

/// Renders records as CSV: per-repeat rows in record order, then mean, min
/// and max rows per (scenario, page size, codec) group. Output is byte
/// deterministic for a given record list.
pub fn to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6},{},{}\n",
            r.scenario.label(),
            r.page_size,
            r.codec.name(),
            r.repeat,
            r.write_gbps,
            r.read_gbps,
            r.store_calls_write,
            r.store_calls_read
        ));
    }
    // Group in first-seen order.
    let mut groups: Vec<(&'static str, u64, CodecId, Vec<&BenchRecord>)> = Vec::new();
    for r in records {
        match groups
            .iter_mut()
            .find(|(label, p, c, _)| *label == r.scenario.label() && *p == r.page_size && *c == r.codec)
        {
            Some((_, _, _, members)) => members.push(r),
            None => groups.push((r.scenario.label(), r.page_size, r.codec, vec![r])),
        }
    }
    for (label, page_size, codec, members) in groups {
        let n = members.len() as f64;
        let mean_w: f64 = members.iter().map(|r| r.write_gbps).sum::<f64>() / n;
        let mean_r: f64 = members.iter().map(|r| r.read_gbps).sum::<f64>() / n;
        let min_w = members.iter().map(|r| r.write_gbps).fold(f64::INFINITY, f64::min);
        let min_r = members.iter().map(|r| r.read_gbps).fold(f64::INFINITY, f64::min);
        let max_w = members.iter().map(|r| r.write_gbps).fold(f64::NEG_INFINITY, f64::max);
        let max_r = members.iter().map(|r| r.read_gbps).fold(f64::NEG_INFINITY, f64::max);
        // Call counts are structural and identical across repeats.
        let calls_w = members[0].store_calls_write;
        let calls_r = members[0].store_calls_read;
        for (tag, w, r) in [("mean", mean_w, mean_r), ("min", min_w, min_r), ("max", max_w, max_r)]
        {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.6},{},{}\n",
                label,
                page_size,
                codec.name(),
                tag,
                w,
                r,
                calls_w,
                calls_r
            ));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
struct CsvRow {
    scenario: String,
    page_size: u64,
    codec: String,
    repeat: String,
    write_gbps: f64,
    read_gbps: f64,
}

fn parse_csv(csv: &str) -> Result<Vec<CsvRow>> {
    let mut lines = csv.lines();
    match lines.next() {
        Some(header) if header == CSV_HEADER => {}
        _ => return Err(Error::Format("benchmark CSV header is missing or unexpected".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Format(format!("CSV line {} has {} fields", i + 2, fields.len())));
        }
        let parse_u64 = |s: &str, what: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::Format(format!("CSV line {}: bad {what} `{s}`", i + 2)))
        };
        let parse_f64 = |s: &str, what: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("CSV line {}: bad {what} `{s}`", i + 2)))
        };
        rows.push(CsvRow {
            scenario: fields[0].to_string(),
            page_size: parse_u64(fields[1], "page size")?,
            codec: fields[2].to_string(),
            repeat: fields[3].to_string(),
            write_gbps: parse_f64(fields[4], "write throughput")?,
            read_gbps: parse_f64(fields[5], "read throughput")?,
        });
    }
    Ok(rows)
}

fn mean_row<'a>(
    rows: &'a [CsvRow],
    scenario: &str,
    page_size: u64,
    codec: &str,
) -> Result<&'a CsvRow> {
    rows.iter()
        .find(|r| {
            r.scenario == scenario && r.page_size == page_size && r.codec == codec && r.repeat == "mean"
        })
        .ok_or_else(|| {
            Error::Format(format!(
                "no `{scenario}` mean row for codec {codec} at page size {page_size}"
            ))
        })
}

/// Mean-row throughput ratios (write, read) of `numerator` over
/// `denominator` at one page size and codec.
pub fn speedup_between(
    csv: &str,
    page_size: u64,
    codec: &str,
    numerator: &str,
    denominator: &str,
) -> Result<(f64, f64)> {
    let rows = parse_csv(csv)?;
    let num = mean_row(&rows, numerator, page_size, codec)?;
    let den = mean_row(&rows, denominator, page_size, codec)?;
    Ok((num.write_gbps / den.write_gbps, num.read_gbps / den.read_gbps))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub codec: String,
    pub page_size: u64,
    pub write_speedup: f64,
    pub read_speedup: f64,
}

/// Target-over-Baseline speedups at one page size, one row per codec found
/// in the CSV.
pub fn report_compare(csv: &str, page_size: u64) -> Result<Vec<SpeedupRow>> {
    let rows = parse_csv(csv)?;
    let mut codecs: Vec<String> = Vec::new();
    for row in &rows {
        if !codecs.contains(&row.codec) {
            codecs.push(row.codec.clone());
        }
    }
    let mut out = Vec::new();
    for codec in codecs {
        let target = mean_row(&rows, "Target", page_size, &codec)?;
        let baseline = mean_row(&rows, "Baseline", page_size, &codec)?;
        out.push(SpeedupRow {
            codec,
            page_size,
            write_speedup: target.write_gbps / baseline.write_gbps,
            read_speedup: target.read_gbps / baseline.read_gbps,
        });
    }
    Ok(out)
}
