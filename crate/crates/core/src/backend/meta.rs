//! Little-endian binary encoding of dataset metadata: headers, page
//! descriptors, cluster descriptors and block maps. Used both for the
//! metadata objects of store-backed datasets and the page-list sections of
//! the flat-file backend. Multi-byte integers are little-endian; object ids
//! are written low word first.

use crate::codec::CodecId;
use crate::error::{Error, Result};
use crate::model::{
    ClusterDescriptor, ElementType, FieldSpec, FieldType, Locator, PageDescriptor, Schema,
};
use crate::store::ObjectKey;

use super::splice::{BlockMember, SgBlock};
use super::MappingKind;

pub(crate) const HEADER_VERSION: u16 = 1;

pub(crate) struct Dec<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Dec<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Dec { bytes, at: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(Error::Format("truncated metadata".into()));
        }
        let out = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn u128(&mut self) -> Result<u128> {
        let lo = self.u64()? as u128;
        let hi = self.u64()? as u128;
        Ok(lo | hi << 64)
    }

    pub fn done(&self) -> Result<()> {
        if self.at != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after metadata",
                self.bytes.len() - self.at
            )));
        }
        Ok(())
    }
}

fn put_u128(out: &mut Vec<u8>, v: u128) {
    out.extend_from_slice(&(v as u64).to_le_bytes());
    out.extend_from_slice(&((v >> 64) as u64).to_le_bytes());
}

fn put_key(out: &mut Vec<u8>, key: &ObjectKey) {
    put_u128(out, key.oid);
    out.extend_from_slice(&key.dkey.to_le_bytes());
    out.extend_from_slice(&key.akey.to_le_bytes());
}

fn get_key(dec: &mut Dec) -> Result<ObjectKey> {
    Ok(ObjectKey::new(dec.u128()?, dec.u64()?, dec.u64()?))
}

const FIELD_VARLIST: u8 = 5;

pub(crate) fn encode_schema(out: &mut Vec<u8>, schema: &Schema) {
    out.extend_from_slice(&(schema.fields.len() as u32).to_le_bytes());
    for field in &schema.fields {
        let name = field.name.as_bytes();
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        match field.field_type {
            FieldType::Int32 => out.push(ElementType::Int32.tag()),
            FieldType::Int64 => out.push(ElementType::Int64.tag()),
            FieldType::Float32 => out.push(ElementType::Float32.tag()),
            FieldType::Float64 => out.push(ElementType::Float64.tag()),
            FieldType::Index => out.push(ElementType::Index.tag()),
            FieldType::VarList(element) => {
                out.push(FIELD_VARLIST);
                out.push(element.tag());
            }
        }
    }
}

pub(crate) fn decode_schema(dec: &mut Dec) -> Result<Schema> {
    let count = dec.u32()? as usize;
    let mut fields = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = dec.u16()? as usize;
        let name = std::str::from_utf8(dec.take(name_len)?)
            .map_err(|_| Error::Format("field name is not utf-8".into()))?
            .to_string();
        let tag = dec.u8()?;
        let field_type = if tag == FIELD_VARLIST {
            FieldType::VarList(ElementType::from_tag(dec.u8()?)?)
        } else {
            match ElementType::from_tag(tag)? {
                ElementType::Int32 => FieldType::Int32,
                ElementType::Int64 => FieldType::Int64,
                ElementType::Float32 => FieldType::Float32,
                ElementType::Float64 => FieldType::Float64,
                ElementType::Index => FieldType::Index,
            }
        };
        fields.push(FieldSpec { name, field_type });
    }
    Schema::new(fields).map_err(|e| Error::Format(format!("bad schema in header: {e}")))
}

fn encode_locator(out: &mut Vec<u8>, locator: &Locator) {
    match *locator {
        Locator::FileRange { offset, length } => {
            out.push(0);
            out.extend_from_slice(&offset.to_le_bytes());
            out.extend_from_slice(&length.to_le_bytes());
        }
        Locator::ObjectRef { key, offset_in_value, length } => {
            out.push(1);
            put_key(out, &key);
            out.extend_from_slice(&offset_in_value.to_le_bytes());
            out.extend_from_slice(&length.to_le_bytes());
        }
    }
}

fn decode_locator(dec: &mut Dec) -> Result<Locator> {
    match dec.u8()? {
        0 => Ok(Locator::FileRange { offset: dec.u64()?, length: dec.u64()? }),
        1 => Ok(Locator::ObjectRef {
            key: get_key(dec)?,
            offset_in_value: dec.u64()?,
            length: dec.u64()?,
        }),
        other => Err(Error::Format(format!("unknown locator tag {other}"))),
    }
}

pub(crate) fn encode_page(out: &mut Vec<u8>, page: &PageDescriptor) {
    out.extend_from_slice(&page.page_id.to_le_bytes());
    out.extend_from_slice(&page.cluster_id.to_le_bytes());
    out.extend_from_slice(&page.column_id.to_le_bytes());
    out.extend_from_slice(&page.first_element_index.to_le_bytes());
    out.extend_from_slice(&page.num_elements.to_le_bytes());
    out.extend_from_slice(&page.uncompressed_size.to_le_bytes());
    out.extend_from_slice(&page.stored_size.to_le_bytes());
    out.extend_from_slice(&page.checksum.to_le_bytes());
    encode_locator(out, &page.locator);
}

pub(crate) fn decode_page(dec: &mut Dec) -> Result<PageDescriptor> {
    Ok(PageDescriptor {
        page_id: dec.u64()?,
        cluster_id: dec.u64()?,
        column_id: dec.u64()?,
        first_element_index: dec.u64()?,
        num_elements: dec.u64()?,
        uncompressed_size: dec.u64()?,
        stored_size: dec.u64()?,
        checksum: dec.u32()?,
        locator: decode_locator(dec)?,
    })
}

pub(crate) fn encode_cluster(out: &mut Vec<u8>, cluster: &ClusterDescriptor) {
    out.extend_from_slice(&cluster.cluster_id.to_le_bytes());
    out.extend_from_slice(&cluster.first_entry.to_le_bytes());
    out.extend_from_slice(&cluster.num_entries.to_le_bytes());
    out.extend_from_slice(&(cluster.page_groups.len() as u32).to_le_bytes());
    for (column_id, group) in &cluster.page_groups {
        out.extend_from_slice(&column_id.to_le_bytes());
        out.extend_from_slice(&(group.len() as u32).to_le_bytes());
        for page in group {
            encode_page(out, page);
        }
    }
}

pub(crate) fn decode_cluster(dec: &mut Dec) -> Result<ClusterDescriptor> {
    let cluster_id = dec.u64()?;
    let first_entry = dec.u64()?;
    let num_entries = dec.u64()?;
    let groups = dec.u32()? as usize;
    let mut page_groups = std::collections::BTreeMap::new();
    for _ in 0..groups {
        let column_id = dec.u64()?;
        let pages = dec.u32()? as usize;
        let mut group = Vec::with_capacity(pages);
        for _ in 0..pages {
            group.push(decode_page(dec)?);
        }
        if page_groups.insert(column_id, group).is_some() {
            return Err(Error::Format(format!("duplicate page group for column {column_id}")));
        }
    }
    let cluster = ClusterDescriptor { cluster_id, first_entry, num_entries, page_groups };
    cluster.validate()?;
    Ok(cluster)
}

fn encode_block(out: &mut Vec<u8>, block: &SgBlock) {
    out.extend_from_slice(&block.cluster_id.to_le_bytes());
    out.extend_from_slice(&block.column_id.to_le_bytes());
    put_key(out, &block.key);
    out.extend_from_slice(&block.total_size.to_le_bytes());
    out.extend_from_slice(&(block.members.len() as u32).to_le_bytes());
    for member in &block.members {
        out.extend_from_slice(&member.page_id.to_le_bytes());
        out.extend_from_slice(&member.offset.to_le_bytes());
    }
}

fn decode_block(dec: &mut Dec) -> Result<SgBlock> {
    Ok(SgBlock {
        cluster_id: dec.u64()?,
        column_id: dec.u64()?,
        key: get_key(dec)?,
        total_size: dec.u64()?,
        members: {
            let count = dec.u32()? as usize;
            let mut members = Vec::with_capacity(count);
            for _ in 0..count {
                members.push(BlockMember { page_id: dec.u64()?, offset: dec.u64()? });
            }
            members
        },
    })
}

/// Store dataset header: version, codec, mapping, schema.
pub(crate) fn encode_store_header(schema: &Schema, codec: CodecId, mapping: MappingKind) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&HEADER_VERSION.to_le_bytes());
    out.push(codec.tag());
    out.push(mapping.tag());
    encode_schema(&mut out, schema);
    out
}

pub(crate) fn decode_store_header(bytes: &[u8]) -> Result<(Schema, CodecId, MappingKind)> {
    let mut dec = Dec::new(bytes);
    let version = dec.u16()?;
    if version != HEADER_VERSION {
        return Err(Error::Format(format!("unsupported dataset header version {version}")));
    }
    let codec = CodecId::from_tag(dec.u8()?)?;
    let mapping = MappingKind::from_tag(dec.u8()?)?;
    let schema = decode_schema(&mut dec)?;
    dec.done()?;
    Ok((schema, codec, mapping))
}

/// Flat-file dataset header: codec plus schema (version lives in the file
/// preamble).
pub(crate) fn encode_file_header(schema: &Schema, codec: CodecId) -> Vec<u8> {
    let mut out = Vec::new();
    out.push(codec.tag());
    encode_schema(&mut out, schema);
    out
}

pub(crate) fn decode_file_header(bytes: &[u8]) -> Result<(Schema, CodecId)> {
    let mut dec = Dec::new(bytes);
    let codec = CodecId::from_tag(dec.u8()?)?;
    let schema = decode_schema(&mut dec)?;
    dec.done()?;
    Ok((schema, codec))
}

/// Page listing: every cluster descriptor plus the block map.
pub(crate) fn encode_listing(clusters: &[ClusterDescriptor], blocks: &[SgBlock]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(clusters.len() as u32).to_le_bytes());
    for cluster in clusters {
        encode_cluster(&mut out, cluster);
    }
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for block in blocks {
        encode_block(&mut out, block);
    }
    out
}

pub(crate) fn decode_listing(bytes: &[u8]) -> Result<(Vec<ClusterDescriptor>, Vec<SgBlock>)> {
    let mut dec = Dec::new(bytes);
    let cluster_count = dec.u32()? as usize;
    let mut clusters = Vec::with_capacity(cluster_count);
    for _ in 0..cluster_count {
        clusters.push(decode_cluster(&mut dec)?);
    }
    let block_count = dec.u32()? as usize;
    let mut blocks = Vec::with_capacity(block_count);
    for _ in 0..block_count {
        blocks.push(decode_block(&mut dec)?);
    }
    dec.done()?;
    Ok((clusters, blocks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FieldSpec;

    fn sample_schema() -> Schema {
        Schema::new(vec![
            FieldSpec::new("a", FieldType::Float64),
            FieldSpec::new("b", FieldType::VarList(ElementType::Int32)),
        ])
        .unwrap()
    }

    fn sample_page(locator: Locator) -> PageDescriptor {
        PageDescriptor {
            page_id: 11,
            cluster_id: 2,
            column_id: 1,
            first_element_index: 4096,
            num_elements: 512,
            uncompressed_size: 4096,
            stored_size: 1033,
            checksum: 0xCAFE_F00D,
            locator,
        }
    }

    #[test]
    fn headers_round_trip() {
        let schema = sample_schema();
        let bytes = encode_store_header(&schema, CodecId::Zstd, MappingKind::LocalityDriven);
        let (s2, codec, mapping) = decode_store_header(&bytes).unwrap();
        assert_eq!(s2, schema);
        assert_eq!(codec, CodecId::Zstd);
        assert_eq!(mapping, MappingKind::LocalityDriven);

        let bytes = encode_file_header(&schema, CodecId::None);
        let (s3, codec) = decode_file_header(&bytes).unwrap();
        assert_eq!(s3, schema);
        assert_eq!(codec, CodecId::None);
    }

    #[test]
    fn listing_round_trips() {
        let page = sample_page(Locator::ObjectRef {
            key: ObjectKey::new(2, 1, 11),
            offset_in_value: 0,
            length: 1033,
        });
        let mut page_groups = std::collections::BTreeMap::new();
        page_groups.insert(1, vec![page]);
        let cluster =
            ClusterDescriptor { cluster_id: 2, first_entry: 200, num_entries: 100, page_groups };
        let block = SgBlock {
            cluster_id: 2,
            column_id: 1,
            key: ObjectKey::new(2, 1, 11),
            total_size: 1033,
            members: vec![BlockMember { page_id: 11, offset: 0 }],
        };
        let bytes = encode_listing(&[cluster.clone()], &[block.clone()]);
        let (clusters, blocks) = decode_listing(&bytes).unwrap();
        assert_eq!(clusters, vec![cluster]);
        assert_eq!(blocks, vec![block]);
    }

    #[test]
    fn truncation_is_a_format_error() {
        let schema = sample_schema();
        let bytes = encode_store_header(&schema, CodecId::None, MappingKind::ObjectPerPage);
        for cut in [0, 1, 3, bytes.len() - 1] {
            assert!(matches!(decode_store_header(&bytes[..cut]), Err(Error::Format(_))));
        }
    }

    #[test]
    fn trailing_garbage_is_a_format_error() {
        let schema = sample_schema();
        let mut bytes = encode_store_header(&schema, CodecId::None, MappingKind::ObjectPerPage);
        bytes.push(0);
        assert!(matches!(decode_store_header(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn file_range_locator_round_trips() {
        let page = sample_page(Locator::FileRange { offset: 1 << 30, length: 777 });
        let mut out = Vec::new();
        encode_page(&mut out, &page);
        let mut dec = Dec::new(&out);
        assert_eq!(decode_page(&mut dec).unwrap(), page);
        dec.done().unwrap();
    }
}
