//! Reference analysis workload: a wide table of float64 columns in which an
//! analysis reads a fixed subset of columns per entry and histograms the
//! magnitude sqrt(x0^2 + ... + x{k-1}^2). Defaults follow the shape used
//! throughout the benchmarks: 26 columns, 18 of them read.
//!
//! Generation is a counter-based generator (splitmix-style finalizer), so
//! any (seed, column, entry) coordinate yields the same value on every
//! platform and run, with no sequential state.

use crate::backend::{CommitOptions, DatasetWriter, FileDataset, StoreDataset};
use crate::codec::CodecId;
use crate::error::{Error, Result};
use crate::model::{
    cluster_entry_ranges, ColumnRole, ElementType, FieldSpec, FieldType, LogicalDataset, Schema,
};
use crate::store::{Session, SessionOptions};

pub const DEFAULT_COLUMNS: u32 = 26;
pub const DEFAULT_READ_COLUMNS: u32 = 18;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Splitmix-style 64-bit finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-column stream seed.
pub fn column_stream(seed: u64, column: u64) -> u64 {
    mix64(seed ^ GAMMA.wrapping_mul(column.wrapping_add(1)))
}

/// Raw bits for one (seed, column, entry) coordinate.
pub fn value_bits(seed: u64, column: u64, entry: u64) -> u64 {
    mix64(column_stream(seed, column).wrapping_add(GAMMA.wrapping_mul(entry.wrapping_add(1))))
}

/// Maps 64 random bits to a double in [0, 1) using the top 53 bits.
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Builds the workload dataset: `num_columns` float64 columns named c00,
/// c01, ..., each entry drawn from [0, 1).
pub fn generate(num_entries: u64, num_columns: u32, seed: u64) -> Result<LogicalDataset> {
    if num_columns == 0 {
        return Err(Error::Config("workload needs at least one column".into()));
    }
    let schema = Schema::new(
        (0..num_columns).map(|j| FieldSpec::new(format!("c{j:02}"), FieldType::Float64)).collect(),
    )?;
    let mut buffers = Vec::with_capacity(num_columns as usize);
    for j in 0..num_columns as u64 {
        let stream = column_stream(seed, j);
        let mut data = Vec::with_capacity((num_entries * 8) as usize);
        for i in 0..num_entries {
            let bits = mix64(stream.wrapping_add(GAMMA.wrapping_mul(i.wrapping_add(1))));
            data.extend_from_slice(&unit_f64(bits).to_le_bytes());
        }
        buffers.push(data);
    }
    LogicalDataset::new(schema, buffers, num_entries)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramSpec {
    pub bins: u32,
    pub lo: f64,
    pub hi: f64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec { bins: 100, lo: 0.0, hi: 5.0 }
    }
}

/// Fixed-width histogram over [lo, hi) with explicit under/overflow counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub spec: HistogramSpec,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(spec: HistogramSpec) -> Result<Self> {
        if spec.bins == 0 {
            return Err(Error::Config("histogram needs at least one bin".into()));
        }
        if !(spec.lo.is_finite() && spec.hi.is_finite() && spec.lo < spec.hi) {
            return Err(Error::Config("histogram range must be finite with lo < hi".into()));
        }
        Ok(Histogram { spec, counts: vec![0; spec.bins as usize], underflow: 0, overflow: 0 })
    }

    pub fn fill(&mut self, x: f64) {
        if !(x >= self.spec.lo) {
            self.underflow += 1;
        } else if x >= self.spec.hi {
            self.overflow += 1;
        } else {
            let fraction = (x - self.spec.lo) / (self.spec.hi - self.spec.lo);
            let bin = ((fraction * self.spec.bins as f64) as usize).min(self.counts.len() - 1);
            self.counts[bin] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.underflow + self.overflow + self.counts.iter().sum::<u64>()
    }

    /// CSV rendering: one row per bin plus under/overflow rows.
    pub fn to_csv(&self) -> String {
        let width = (self.spec.hi - self.spec.lo) / self.spec.bins as f64;
        let mut out = String::from("bin_lo,bin_hi,count\n");
        out.push_str(&format!("-inf,{:.6},{}\n", self.spec.lo, self.underflow));
        for (i, count) in self.counts.iter().enumerate() {
            let lo = self.spec.lo + i as f64 * width;
            let hi = if i + 1 == self.counts.len() {
                self.spec.hi
            } else {
                self.spec.lo + (i as f64 + 1.0) * width
            };
            out.push_str(&format!("{lo:.6},{hi:.6},{count}\n"));
        }
        out.push_str(&format!("{:.6},inf,{}\n", self.spec.hi, self.overflow));
        out
    }
}

fn check_read_columns(
    columns: &[crate::model::ColumnDescriptor],
    read_columns: u32,
) -> Result<()> {
    if read_columns == 0 {
        return Err(Error::Config("analysis must read at least one column".into()));
    }
    if read_columns as usize > columns.len() {
        return Err(Error::Schema(format!(
            "analysis reads {read_columns} columns, dataset has {}",
            columns.len()
        )));
    }
    for column in &columns[..read_columns as usize] {
        if column.element_type != ElementType::Float64 || column.role != ColumnRole::Scalar {
            return Err(Error::Schema(format!(
                "analysis column {} ({}) is not a scalar float64",
                column.column_id, column.source_field
            )));
        }
    }
    Ok(())
}

/// Accumulates the per-entry magnitude over column buffers laid out as
/// contiguous float64 little-endian values.
fn fill_from_columns(hist: &mut Histogram, columns: &[&[u8]], entries: u64) {
    for e in 0..entries as usize {
        let mut sum = 0.0f64;
        for data in columns {
            let v = f64::from_le_bytes(data[e * 8..e * 8 + 8].try_into().unwrap());
            sum += v * v;
        }
        hist.fill(sum.sqrt());
    }
}

/// Storage-free reference: histograms straight from in-memory buffers.
pub fn histogram_from_dataset(
    dataset: &LogicalDataset,
    read_columns: u32,
    spec: HistogramSpec,
) -> Result<Histogram> {
    let descriptors: Vec<_> = dataset.columns.iter().map(|c| c.descriptor.clone()).collect();
    check_read_columns(&descriptors, read_columns)?;
    let mut hist = Histogram::new(spec)?;
    let columns: Vec<&[u8]> =
        dataset.columns[..read_columns as usize].iter().map(|c| c.data.as_slice()).collect();
    fill_from_columns(&mut hist, &columns, dataset.num_entries);
    Ok(hist)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportOptions {
    pub page_size: u64,
    pub cluster_entries: u64,
    pub codec: CodecId,
    pub zstd_level: i32,
    pub commit: CommitOptions,
    pub session: SessionOptions,
}

impl Default for ImportOptions {
    fn default() -> Self {
        ImportOptions {
            page_size: 64 * 1024,
            cluster_entries: 100_000,
            codec: CodecId::None,
            zstd_level: crate::codec::DEFAULT_ZSTD_LEVEL,
            commit: CommitOptions::default(),
            session: SessionOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportReport {
    pub entries: u64,
    pub logical_bytes: u64,
    /// Stored bytes that went through charged store calls.
    pub bytes_written: u64,
    pub simulated_seconds: f64,
    /// Uncompressed logical bytes per simulated second.
    pub write_throughput: f64,
    pub store_calls: u64,
}

/// Imports a dataset into the store directory at `store_dir`, cluster by
/// cluster. The directory must not already hold data.
pub fn import(
    dataset: &LogicalDataset,
    store_dir: &std::path::Path,
    options: &ImportOptions,
) -> Result<ImportReport> {
    let session = Session::open(store_dir, options.session.clone())?;
    let result = (|| {
        let mut writer = DatasetWriter::create(
            &session,
            &dataset.schema,
            options.codec,
            options.zstd_level,
            options.page_size,
            options.commit,
        )?;
        for (first, count) in cluster_entry_ranges(dataset.num_entries, options.cluster_entries)? {
            let slices: Vec<&[u8]> = dataset
                .columns
                .iter()
                .map(|c| {
                    let j = c.descriptor.column_id;
                    let (e0, e1) = dataset.element_range(j, first, first + count);
                    dataset.column_slice(j, e0, e1)
                })
                .collect();
            writer.commit_cluster(count, &slices)?;
        }
        writer.finish()
    })();
    let elapsed = session.elapsed();
    let stats = session.stats();
    session.close()?;
    result?;
    let logical_bytes = dataset.uncompressed_bytes();
    Ok(ImportReport {
        entries: dataset.num_entries,
        logical_bytes,
        bytes_written: stats.bytes_updated,
        simulated_seconds: elapsed,
        write_throughput: throughput(logical_bytes, elapsed),
        store_calls: stats.update_calls,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzeReport {
    pub entries: u64,
    /// Stored bytes fetched from the store.
    pub bytes_read: u64,
    /// Uncompressed bytes of the columns the analysis asked for.
    pub logical_bytes: u64,
    pub simulated_seconds: f64,
    /// Uncompressed logical bytes per simulated second.
    pub read_throughput: f64,
    pub store_calls: u64,
}

/// Runs the analysis against a store-backed dataset: reads the first
/// `read_columns` columns cluster by cluster and histograms the magnitude.
pub fn analyze_store(
    store_dir: &std::path::Path,
    read_columns: u32,
    spec: HistogramSpec,
    session_options: SessionOptions,
) -> Result<(Histogram, AnalyzeReport)> {
    let dataset = StoreDataset::open(store_dir, session_options)?;
    check_read_columns(dataset.columns(), read_columns)?;
    let wanted: Vec<u64> = (0..read_columns as u64).collect();
    let mut hist = Histogram::new(spec)?;
    let mut logical_bytes = 0u64;
    for cluster in dataset.clusters() {
        let columns = dataset.read_cluster_columns(cluster, &wanted)?;
        logical_bytes += columns.iter().map(|c| c.len() as u64).sum::<u64>();
        let slices: Vec<&[u8]> = columns.iter().map(|c| c.as_slice()).collect();
        fill_from_columns(&mut hist, &slices, cluster.num_entries);
    }
    let elapsed = dataset.session().elapsed();
    let stats = dataset.session().stats();
    let entries = dataset.num_entries();
    dataset.close()?;
    Ok((
        hist,
        AnalyzeReport {
            entries,
            bytes_read: stats.bytes_fetched,
            logical_bytes,
            simulated_seconds: elapsed,
            read_throughput: throughput(logical_bytes, elapsed),
            store_calls: stats.fetch_calls,
        },
    ))
}

/// Same analysis against a flat-file dataset. Returns the histogram and the
/// stored bytes read.
pub fn analyze_file(
    path: &std::path::Path,
    read_columns: u32,
    spec: HistogramSpec,
) -> Result<(Histogram, u64)> {
    let dataset = FileDataset::open(path)?;
    check_read_columns(dataset.columns(), read_columns)?;
    let wanted: Vec<u64> = (0..read_columns as u64).collect();
    let mut hist = Histogram::new(spec)?;
    for cluster in dataset.clusters() {
        let columns = dataset.read_cluster_columns(cluster, &wanted)?;
        let slices: Vec<&[u8]> = columns.iter().map(|c| c.as_slice()).collect();
        fill_from_columns(&mut hist, &slices, cluster.num_entries);
    }
    Ok((hist, dataset.bytes_read()))
}

fn throughput(bytes: u64, seconds: f64) -> f64 {
    if seconds > 0.0 {
        bytes as f64 / seconds
    } else {
        0.0
    }
}
