//! Write path for store-backed datasets. Pages are staged per cluster,
//! mapped to object keys, optionally spliced into blocks, and handed to the
//! store either as one coalesced concurrent dispatch (vector writes) or as
//! individual calls.

use std::collections::BTreeMap;

use crate::codec::{compress, CodecId};
use crate::error::{Error, Result};
use crate::model::{
    decompose_schema, slice_into_pages, ClusterDescriptor, ColumnDescriptor, ColumnRole, Locator,
    PageDescriptor, Schema, StagedPage,
};
use crate::store::{Session, META_AKEY_COMPLETE, META_AKEY_HEADER, META_AKEY_LISTING};

use super::meta::{encode_listing, encode_store_header};
use super::splice::{pack_page_group, SgBlock};
use super::{coalesce, IoRequest, MappingKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommitOptions {
    pub mapping: MappingKind,
    /// Issue all of a cluster's writes as one concurrent dispatch.
    pub vector_writes: bool,
    /// When set, splice each page group into blocks of at most this size.
    pub target_block_size: Option<u64>,
}

impl Default for CommitOptions {
    fn default() -> Self {
        CommitOptions {
            mapping: MappingKind::LocalityDriven,
            vector_writes: true,
            target_block_size: None,
        }
    }
}

/// Writes one cluster's staged pages to the store and returns the resulting
/// descriptor plus any spliced blocks. Pages must all belong to
/// `cluster_id`; within each column they must tile a contiguous element
/// range.
pub fn commit_cluster(
    session: &Session,
    cluster_id: u64,
    first_entry: u64,
    num_entries: u64,
    staged: Vec<StagedPage>,
    options: CommitOptions,
) -> Result<(ClusterDescriptor, Vec<SgBlock>)> {
    let mut groups: BTreeMap<u64, Vec<StagedPage>> = BTreeMap::new();
    for page in staged {
        if page.cluster_id != cluster_id {
            return Err(Error::Request(format!(
                "page {} belongs to cluster {}, not {cluster_id}",
                page.page_id, page.cluster_id
            )));
        }
        if page.payload.is_empty() || page.num_elements == 0 {
            return Err(Error::Request(format!("page {} is empty", page.page_id)));
        }
        groups.entry(page.column_id).or_default().push(page);
    }

    let mut page_groups: BTreeMap<u64, Vec<PageDescriptor>> = BTreeMap::new();
    let mut blocks = Vec::new();
    let mut requests = Vec::new();
    for (column_id, mut pages) in groups {
        pages.sort_by_key(|p| p.first_element_index);
        let descriptors = match options.target_block_size {
            Some(target) => {
                let sizes: Vec<(u64, u64)> =
                    pages.iter().map(|p| (p.page_id, p.stored_size())).collect();
                let column_blocks =
                    pack_page_group(cluster_id, column_id, &sizes, target, options.mapping)?;
                let by_id: BTreeMap<u64, &StagedPage> =
                    pages.iter().map(|p| (p.page_id, p)).collect();
                let mut descriptors = Vec::with_capacity(pages.len());
                for block in &column_blocks {
                    let mut payload = Vec::with_capacity(block.total_size as usize);
                    for member in &block.members {
                        let page = by_id[&member.page_id];
                        descriptors.push(describe(
                            page,
                            Locator::ObjectRef {
                                key: block.key,
                                offset_in_value: member.offset,
                                length: page.stored_size(),
                            },
                        ));
                        payload.extend_from_slice(&page.payload);
                    }
                    requests.push(IoRequest { key: block.key, payload });
                }
                blocks.extend(column_blocks);
                descriptors.sort_by_key(|d| d.first_element_index);
                descriptors
            }
            None => pages
                .into_iter()
                .map(|page| {
                    let key = options.mapping.map(cluster_id, column_id, page.page_id);
                    let descriptor = describe(
                        &page,
                        Locator::ObjectRef {
                            key,
                            offset_in_value: 0,
                            length: page.stored_size(),
                        },
                    );
                    requests.push(IoRequest { key, payload: page.payload });
                    descriptor
                })
                .collect(),
        };
        page_groups.insert(column_id, descriptors);
    }

    if options.vector_writes {
        session.dispatch_concurrent(coalesce(requests))?;
    } else {
        for request in requests {
            session.update_batch(
                request.key.oid,
                request.key.dkey,
                &[(request.key.akey, request.payload.as_slice())],
            )?;
        }
    }

    let cluster = ClusterDescriptor { cluster_id, first_entry, num_entries, page_groups };
    cluster.validate()?;
    Ok((cluster, blocks))
}

fn describe(page: &StagedPage, locator: Locator) -> PageDescriptor {
    PageDescriptor {
        page_id: page.page_id,
        cluster_id: page.cluster_id,
        column_id: page.column_id,
        first_element_index: page.first_element_index,
        num_elements: page.num_elements,
        uncompressed_size: page.uncompressed_size,
        stored_size: page.stored_size(),
        checksum: crc32fast::hash(&page.payload),
        locator,
    }
}

/// Streams a dataset into a store cluster by cluster. `create` stamps the
/// header, `commit_cluster` appends data, `finish` seals the dataset with
/// its page listing and completion marker. A store that already holds keys
/// is refused.
#[derive(Debug)]
pub struct DatasetWriter<'s> {
    session: &'s Session,
    columns: Vec<ColumnDescriptor>,
    codec: CodecId,
    zstd_level: i32,
    page_size: u64,
    options: CommitOptions,
    clusters: Vec<ClusterDescriptor>,
    blocks: Vec<SgBlock>,
    next_page_id: u64,
    next_first_entry: u64,
    element_cursors: Vec<u64>,
    finished: bool,
}

impl<'s> DatasetWriter<'s> {
    pub fn create(
        session: &'s Session,
        schema: &Schema,
        codec: CodecId,
        zstd_level: i32,
        page_size: u64,
        options: CommitOptions,
    ) -> Result<Self> {
        if !session.is_empty() {
            return Err(Error::Store(format!(
                "store at {} already holds data",
                session.path().display()
            )));
        }
        if codec == CodecId::Zstd && !(1..=22).contains(&zstd_level) {
            return Err(Error::Config(format!("zstd level {zstd_level} out of range 1..=22")));
        }
        let columns = decompose_schema(schema)?;
        if let Some(widest) = columns.iter().map(|c| c.element_size()).max() {
            if page_size < widest {
                return Err(Error::Config(format!(
                    "page size {page_size} smaller than the widest element ({widest} bytes)"
                )));
            }
        }
        session.set_codec_tag(codec.tag())?;
        session.put_meta(META_AKEY_HEADER, &encode_store_header(schema, codec, options.mapping))?;
        let cursors = vec![0u64; columns.len()];
        Ok(DatasetWriter {
            session,
            columns,
            codec,
            zstd_level,
            page_size,
            options,
            clusters: Vec::new(),
            blocks: Vec::new(),
            next_page_id: 0,
            next_first_entry: 0,
            element_cursors: cursors,
            finished: false,
        })
    }

    /// Commits the next cluster. `column_data` holds one buffer per storage
    /// column, in decomposition order, covering exactly `num_entries`
    /// entries.
    pub fn commit_cluster(&mut self, num_entries: u64, column_data: &[&[u8]]) -> Result<()> {
        if self.finished {
            return Err(Error::Request("dataset writer already finished".into()));
        }
        if num_entries == 0 {
            return Err(Error::Request("cluster must cover at least one entry".into()));
        }
        if column_data.len() != self.columns.len() {
            return Err(Error::Schema(format!(
                "cluster carries {} column buffers, schema decomposes into {}",
                column_data.len(),
                self.columns.len()
            )));
        }
        let cluster_id = self.clusters.len() as u64;
        let mut staged = Vec::new();
        for (column, &data) in self.columns.iter().zip(column_data) {
            let element_size = column.element_size();
            let elements = data.len() as u64 / element_size;
            let entry_aligned = !matches!(column.role, ColumnRole::ListElement { .. });
            if entry_aligned && data.len() as u64 != num_entries * element_size {
                return Err(Error::Schema(format!(
                    "column {} carries {} elements for a {}-entry cluster",
                    column.column_id,
                    data.len() as u64 / element_size,
                    num_entries
                )));
            }
            let mut first_element = self.element_cursors[column.column_id as usize];
            for slice in slice_into_pages(data, element_size, self.page_size)? {
                let payload = compress(slice, self.codec, self.zstd_level)?;
                let num_elements = slice.len() as u64 / element_size;
                staged.push(StagedPage {
                    page_id: self.next_page_id,
                    cluster_id,
                    column_id: column.column_id,
                    first_element_index: first_element,
                    num_elements,
                    uncompressed_size: slice.len() as u64,
                    payload,
                });
                self.next_page_id += 1;
                first_element += num_elements;
            }
            self.element_cursors[column.column_id as usize] += elements;
        }
        let (cluster, blocks) = commit_cluster(
            self.session,
            cluster_id,
            self.next_first_entry,
            num_entries,
            staged,
            self.options,
        )?;
        self.next_first_entry += num_entries;
        self.clusters.push(cluster);
        self.blocks.extend(blocks);
        Ok(())
    }

    /// Seals the dataset: page listing first, completion marker last.
    pub fn finish(mut self) -> Result<()> {
        self.session.put_meta(META_AKEY_LISTING, &encode_listing(&self.clusters, &self.blocks))?;
        self.session.put_meta(META_AKEY_COMPLETE, &[])?;
        self.finished = true;
        Ok(())
    }

    pub fn clusters(&self) -> &[ClusterDescriptor] {
        &self.clusters
    }

    pub fn blocks(&self) -> &[SgBlock] {
        &self.blocks
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FieldSpec, FieldType};
    use crate::store::{Session, SessionOptions};

    fn f64_schema(names: &[&str]) -> Schema {
        Schema::new(
            names.iter().map(|n| FieldSpec::new(*n, FieldType::Float64)).collect(),
        )
        .unwrap()
    }

    fn le_bytes(values: &[u64]) -> Vec<u8> {
        values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    #[test]
    fn locality_driven_commit_coalesces_per_column() {
        let dir = tempfile::tempdir().unwrap();
        let session = Session::open(dir.path(), SessionOptions::default()).unwrap();
        let schema = f64_schema(&["a", "b"]);
        let mut writer = DatasetWriter::create(
            &session,
            &schema,
            CodecId::None,
            0,
            32,
            CommitOptions::default(),
        )
        .unwrap();
        // 8 entries, page target 32 bytes: 2 pages per column.
        let a = le_bytes(&[1, 2, 3, 4, 5, 6, 7, 8]);
        let b = le_bytes(&[9, 10, 11, 12, 13, 14, 15, 16]);
        writer.commit_cluster(8, &[&a, &b]).unwrap();
        assert_eq!(writer.clusters()[0].total_pages(), 4);
        writer.finish().unwrap();
        // One call per page group, not one per page.
        assert_eq!(session.stats().update_calls, 2);
        assert_eq!(session.list_keys(0), vec![(0, 0), (0, 1), (1, 2), (1, 3)]);
    }

    #[test]
    fn object_per_page_commit_writes_every_page_alone() {
        let dir = tempfile::tempdir().unwrap();
        let session = Session::open(dir.path(), SessionOptions::default()).unwrap();
        let schema = f64_schema(&["a", "b"]);
        let options = CommitOptions {
            mapping: MappingKind::ObjectPerPage,
            vector_writes: false,
            target_block_size: None,
        };
        let mut writer =
            DatasetWriter::create(&session, &schema, CodecId::None, 0, 32, options).unwrap();
        let a = le_bytes(&[1, 2, 3, 4, 5, 6, 7, 8]);
        let b = le_bytes(&[9, 10, 11, 12, 13, 14, 15, 16]);
        writer.commit_cluster(8, &[&a, &b]).unwrap();
        writer.finish().unwrap();
        assert_eq!(session.stats().update_calls, 4);
        for page in 0..4u128 {
            assert_eq!(session.list_keys(page), vec![(0, 0)]);
        }
    }

    #[test]
    fn splicing_packs_a_page_group_into_one_value() {
        let dir = tempfile::tempdir().unwrap();
        let session = Session::open(dir.path(), SessionOptions::default()).unwrap();
        let schema = f64_schema(&["a"]);
        let options = CommitOptions {
            mapping: MappingKind::LocalityDriven,
            vector_writes: true,
            target_block_size: Some(1 << 20),
        };
        let mut writer =
            DatasetWriter::create(&session, &schema, CodecId::None, 0, 32, options).unwrap();
        let data = le_bytes(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12]);
        writer.commit_cluster(12, &[&data]).unwrap();
        let cluster = writer.clusters()[0].clone();
        let blocks = writer.blocks().to_vec();
        writer.finish().unwrap();
        // 3 pages fit one block: one key, one update call.
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].members.len(), 3);
        assert_eq!(session.stats().update_calls, 1);
        assert_eq!(session.list_keys(0), vec![(0, 0)]);
        // The block value is the page payloads spliced in order.
        let value = session.fetch_batch(0, 0, &[0]).unwrap().remove(0);
        assert_eq!(value, data);
        for page in cluster.group(0) {
            match page.locator {
                Locator::ObjectRef { key, offset_in_value, length } => {
                    assert_eq!(key, blocks[0].key);
                    let got = &value[offset_in_value as usize..(offset_in_value + length) as usize];
                    assert_eq!(crc32fast::hash(got), page.checksum);
                }
                other => panic!("expected an object locator, got {other:?}"),
            }
        }
    }

    #[test]
    fn writer_refuses_non_empty_store() {
        let dir = tempfile::tempdir().unwrap();
        let session = Session::open(dir.path(), SessionOptions::default()).unwrap();
        session.update_batch(1, 0, &[(0, b"x".as_slice())]).unwrap();
        let schema = f64_schema(&["a"]);
        let err = DatasetWriter::create(
            &session,
            &schema,
            CodecId::None,
            0,
            4096,
            CommitOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Store(_)));
    }

    #[test]
    fn writer_rejects_misaligned_cluster_data() {
        let dir = tempfile::tempdir().unwrap();
        let session = Session::open(dir.path(), SessionOptions::default()).unwrap();
        let schema = f64_schema(&["a"]);
        let mut writer = DatasetWriter::create(
            &session,
            &schema,
            CodecId::None,
            0,
            4096,
            CommitOptions::default(),
        )
        .unwrap();
        let short = le_bytes(&[1, 2, 3]);
        assert!(writer.commit_cluster(4, &[&short]).is_err());
    }

    #[test]
    fn unfinished_import_blocks_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let session = Session::open(dir.path(), SessionOptions::default()).unwrap();
        let schema = f64_schema(&["a"]);
        let mut writer = DatasetWriter::create(
            &session,
            &schema,
            CodecId::None,
            0,
            4096,
            CommitOptions::default(),
        )
        .unwrap();
        let data = le_bytes(&[1, 2]);
        writer.commit_cluster(2, &[&data]).unwrap();
        // No finish(): simulate an aborted import.
        drop(writer);
        session.close().unwrap();
        let err = Session::open(dir.path(), SessionOptions::default()).unwrap_err();
        assert!(err.to_string().contains("incomplete"));
    }
}
