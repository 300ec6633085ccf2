//! Single-file dataset layout.
//!
//! ```text
//! magic            5 bytes, "CSTR1"
//! version          u16
//! header length    u64
//! header           codec tag u8, schema encoding
//! page data        cluster-major, columns ascending, element order
//! page lists       one encoded cluster descriptor per cluster
//! footer           cluster count u32,
//!                  per cluster: cluster id u64, first entry u64,
//!                               entry count u64, page-list offset u64,
//!                               page-list length u64,
//!                  crc32 u32 over the footer bytes above
//! footer length    u32, bytes from cluster count through the crc
//! magic            5 bytes, "CSTR1"
//! ```
//!
//! All integers are little-endian. Readers locate the footer from the end
//! of the file and verify both magics, the footer checksum, and each page's
//! checksum on read.

use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::codec::{compress, decompress, CodecId, DEFAULT_ZSTD_LEVEL};
use crate::error::{Error, Result};
use crate::model::{
    cluster_entry_ranges, decompose_schema, slice_into_pages, ClusterDescriptor,
    ColumnDescriptor, Locator, LogicalDataset, PageDescriptor, Schema,
};

use super::meta::{decode_cluster, decode_file_header, encode_cluster, encode_file_header, Dec};

pub const FILE_MAGIC: &[u8; 5] = b"CSTR1";
pub const FILE_VERSION: u16 = 1;

const FOOTER_RECORD: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct FileWriteOptions {
    pub codec: CodecId,
    pub zstd_level: i32,
    pub page_size: u64,
    pub cluster_entries: u64,
}

impl Default for FileWriteOptions {
    fn default() -> Self {
        FileWriteOptions {
            codec: CodecId::None,
            zstd_level: DEFAULT_ZSTD_LEVEL,
            page_size: 64 * 1024,
            cluster_entries: 100_000,
        }
    }
}

/// Serializes a dataset to a flat file at `path`, overwriting it.
pub fn write_file_backend(
    dataset: &LogicalDataset,
    path: &Path,
    options: &FileWriteOptions,
) -> Result<()> {
    let columns = decompose_schema(&dataset.schema)?;
    let mut out = BufWriter::new(File::create(path)?);
    let header = encode_file_header(&dataset.schema, options.codec);
    out.write_all(FILE_MAGIC)?;
    out.write_all(&FILE_VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u64).to_le_bytes())?;
    out.write_all(&header)?;
    let mut pos = 5 + 2 + 8 + header.len() as u64;

    let mut clusters = Vec::new();
    let mut next_page_id = 0u64;
    let mut element_cursors = vec![0u64; columns.len()];
    for (cluster_id, &(first_entry, num_entries)) in cluster_entry_ranges(
        dataset.num_entries,
        options.cluster_entries,
    )?
    .iter()
    .enumerate()
    {
        let mut page_groups = std::collections::BTreeMap::new();
        for column in &columns {
            let j = column.column_id;
            let (e0, e1) = dataset.element_range(j, first_entry, first_entry + num_entries);
            let data = dataset.column_slice(j, e0, e1);
            let element_size = column.element_size();
            let mut group = Vec::new();
            let mut first_element = element_cursors[j as usize];
            for slice in slice_into_pages(data, element_size, options.page_size)? {
                let payload = compress(slice, options.codec, options.zstd_level)?;
                out.write_all(&payload)?;
                group.push(PageDescriptor {
                    page_id: next_page_id,
                    cluster_id: cluster_id as u64,
                    column_id: j,
                    first_element_index: first_element,
                    num_elements: slice.len() as u64 / element_size,
                    uncompressed_size: slice.len() as u64,
                    stored_size: payload.len() as u64,
                    checksum: crc32fast::hash(&payload),
                    locator: Locator::FileRange { offset: pos, length: payload.len() as u64 },
                });
                next_page_id += 1;
                first_element += slice.len() as u64 / element_size;
                pos += payload.len() as u64;
            }
            element_cursors[j as usize] += (e1 - e0) as u64;
            if !group.is_empty() {
                page_groups.insert(j, group);
            }
        }
        let cluster = ClusterDescriptor {
            cluster_id: cluster_id as u64,
            first_entry,
            num_entries,
            page_groups,
        };
        cluster.validate()?;
        clusters.push(cluster);
    }

    let mut footer = Vec::new();
    footer.extend_from_slice(&(clusters.len() as u32).to_le_bytes());
    for cluster in &clusters {
        let mut list = Vec::new();
        encode_cluster(&mut list, cluster);
        out.write_all(&list)?;
        footer.extend_from_slice(&cluster.cluster_id.to_le_bytes());
        footer.extend_from_slice(&cluster.first_entry.to_le_bytes());
        footer.extend_from_slice(&cluster.num_entries.to_le_bytes());
        footer.extend_from_slice(&pos.to_le_bytes());
        footer.extend_from_slice(&(list.len() as u64).to_le_bytes());
        pos += list.len() as u64;
    }
    footer.extend_from_slice(&crc32fast::hash(&footer).to_le_bytes());
    out.write_all(&footer)?;
    out.write_all(&(footer.len() as u32).to_le_bytes())?;
    out.write_all(FILE_MAGIC)?;
    out.flush()?;
    Ok(())
}

pub struct FileDataset {
    file: Mutex<File>,
    schema: Schema,
    columns: Vec<ColumnDescriptor>,
    codec: CodecId,
    clusters: Vec<ClusterDescriptor>,
    num_entries: u64,
    bytes_read: AtomicU64,
}

impl FileDataset {
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = File::open(path)?;
        let len = file.metadata()?.len();
        let min = 5 + 2 + 8 + 1 + 4 + 4 + 5;
        if len < min {
            return Err(Error::Format(format!("file is {len} bytes, too short for a dataset")));
        }

        let mut preamble = [0u8; 15];
        file.read_exact(&mut preamble)?;
        if &preamble[..5] != FILE_MAGIC {
            return Err(Error::Format("bad leading magic".into()));
        }
        let version = u16::from_le_bytes(preamble[5..7].try_into().unwrap());
        if version != FILE_VERSION {
            return Err(Error::Format(format!("unsupported file version {version}")));
        }
        let header_len = u64::from_le_bytes(preamble[7..15].try_into().unwrap());
        if 15 + header_len > len {
            return Err(Error::Format("header length points past the end of the file".into()));
        }
        let mut header = vec![0u8; header_len as usize];
        file.read_exact(&mut header)?;
        let (schema, codec) = decode_file_header(&header)?;

        let mut trailer = [0u8; 9];
        file.seek(SeekFrom::Start(len - 9))?;
        file.read_exact(&mut trailer)?;
        if &trailer[4..] != FILE_MAGIC {
            return Err(Error::Format("bad trailing magic".into()));
        }
        let footer_len = u32::from_le_bytes(trailer[..4].try_into().unwrap()) as u64;
        if footer_len < 8 || footer_len + 9 > len {
            return Err(Error::Format("footer length is implausible".into()));
        }
        let footer_start = len - 9 - footer_len;
        file.seek(SeekFrom::Start(footer_start))?;
        let mut footer = vec![0u8; footer_len as usize];
        file.read_exact(&mut footer)?;
        let (body, crc_bytes) = footer.split_at(footer.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(crc_bytes.try_into().unwrap()) {
            return Err(Error::Format("footer fails its checksum".into()));
        }
        let mut dec = Dec::new(body);
        let cluster_count = dec.u32()? as usize;
        if body.len() != 4 + cluster_count * FOOTER_RECORD {
            return Err(Error::Format("footer size disagrees with its cluster count".into()));
        }
        let mut clusters = Vec::with_capacity(cluster_count);
        for _ in 0..cluster_count {
            let cluster_id = dec.u64()?;
            let first_entry = dec.u64()?;
            let num_entries = dec.u64()?;
            let list_offset = dec.u64()?;
            let list_length = dec.u64()?;
            if list_offset + list_length > footer_start {
                return Err(Error::Format(format!(
                    "page list of cluster {cluster_id} overlaps the footer"
                )));
            }
            file.seek(SeekFrom::Start(list_offset))?;
            let mut list = vec![0u8; list_length as usize];
            file.read_exact(&mut list)?;
            let mut list_dec = Dec::new(&list);
            let cluster = decode_cluster(&mut list_dec)?;
            list_dec.done()?;
            if cluster.cluster_id != cluster_id
                || cluster.first_entry != first_entry
                || cluster.num_entries != num_entries
            {
                return Err(Error::Format(format!(
                    "footer and page list disagree about cluster {cluster_id}"
                )));
            }
            clusters.push(cluster);
        }

        let columns = decompose_schema(&schema)?;
        let num_entries = clusters.iter().map(|c| c.num_entries).sum();
        Ok(FileDataset {
            file: Mutex::new(file),
            schema,
            columns,
            codec,
            clusters,
            num_entries,
            bytes_read: AtomicU64::new(0),
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn columns(&self) -> &[ColumnDescriptor] {
        &self.columns
    }

    pub fn clusters(&self) -> &[ClusterDescriptor] {
        &self.clusters
    }

    pub fn codec(&self) -> CodecId {
        self.codec
    }

    pub fn num_entries(&self) -> u64 {
        self.num_entries
    }

    /// Stored bytes read through `read_pages` so far.
    pub fn bytes_read(&self) -> u64 {
        self.bytes_read.load(Ordering::Relaxed)
    }

    /// Reads and decodes pages, in request order.
    pub fn read_pages(&self, requests: &[&PageDescriptor]) -> Result<Vec<Vec<u8>>> {
        let mut file = self.file.lock().unwrap();
        let mut out = Vec::with_capacity(requests.len());
        for page in requests {
            let (offset, length) = match page.locator {
                Locator::FileRange { offset, length } => (offset, length),
                Locator::ObjectRef { .. } => {
                    return Err(Error::Format(format!(
                        "page {} carries an object locator in a flat-file dataset",
                        page.page_id
                    )))
                }
            };
            file.seek(SeekFrom::Start(offset))?;
            let mut stored = vec![0u8; length as usize];
            file.read_exact(&mut stored)?;
            if crc32fast::hash(&stored) != page.checksum {
                return Err(Error::Integrity(format!(
                    "page {} fails its checksum",
                    page.page_id
                )));
            }
            self.bytes_read.fetch_add(length, Ordering::Relaxed);
            out.push(decompress(&stored, self.codec, page.uncompressed_size)?);
        }
        Ok(out)
    }

    /// Whole column slices of one cluster, as contiguous uncompressed bytes.
    pub fn read_cluster_columns(
        &self,
        cluster: &ClusterDescriptor,
        column_ids: &[u64],
    ) -> Result<Vec<Vec<u8>>> {
        let mut requests = Vec::new();
        for &column_id in column_ids {
            for page in cluster.group(column_id) {
                requests.push(page);
            }
        }
        let pages = self.read_pages(&requests)?;
        let mut out = Vec::with_capacity(column_ids.len());
        let mut cursor = pages.into_iter();
        for &column_id in column_ids {
            let group = cluster.group(column_id);
            let total: u64 = group.iter().map(|p| p.uncompressed_size).sum();
            let mut buffer = Vec::with_capacity(total as usize);
            for _ in group {
                buffer.extend_from_slice(&cursor.next().expect("one payload per request"));
            }
            out.push(buffer);
        }
        Ok(out)
    }

    pub fn read_all(&self) -> Result<LogicalDataset> {
        let all_columns: Vec<u64> = self.columns.iter().map(|c| c.column_id).collect();
        let mut buffers: Vec<Vec<u8>> = vec![Vec::new(); self.columns.len()];
        for cluster in &self.clusters {
            let parts = self.read_cluster_columns(cluster, &all_columns)?;
            for (buffer, part) in buffers.iter_mut().zip(parts) {
                buffer.extend_from_slice(&part);
            }
        }
        LogicalDataset::new(self.schema.clone(), buffers, self.num_entries)
    }
}

/// Reads a whole flat-file dataset back into memory.
pub fn read_file_backend(path: &Path) -> Result<LogicalDataset> {
    FileDataset::open(path)?.read_all()
}
