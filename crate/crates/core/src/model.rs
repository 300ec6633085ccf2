//! Logical data model: schemas, column decomposition, pages and clusters.
//!
//! A schema is an ordered list of named fields. Scalar fields map to one
//! column; variable-length list fields decompose into an offset column
//! (cumulative element counts, one per entry) followed by an element column.
//! Column data is sliced into fixed-target pages; pages of one column within
//! one cluster form a page group.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::store::ObjectKey;

/// Physical element types carried by columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementType {
    Int32,
    Int64,
    Float32,
    Float64,
    /// Unsigned 64-bit cumulative counts, used by list offset columns.
    Index,
}

impl ElementType {
    pub const fn size(self) -> u64 {
        match self {
            ElementType::Int32 | ElementType::Float32 => 4,
            ElementType::Int64 | ElementType::Float64 | ElementType::Index => 8,
        }
    }

    pub const fn tag(self) -> u8 {
        match self {
            ElementType::Int32 => 0,
            ElementType::Int64 => 1,
            ElementType::Float32 => 2,
            ElementType::Float64 => 3,
            ElementType::Index => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            0 => ElementType::Int32,
            1 => ElementType::Int64,
            2 => ElementType::Float32,
            3 => ElementType::Float64,
            4 => ElementType::Index,
            other => return Err(Error::Format(format!("unknown element type tag {other}"))),
        })
    }

    pub const fn name(self) -> &'static str {
        match self {
            ElementType::Int32 => "int32",
            ElementType::Int64 => "int64",
            ElementType::Float32 => "float32",
            ElementType::Float64 => "float64",
            ElementType::Index => "index",
        }
    }
}

/// Field types exposed at the schema level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldType {
    Int32,
    Int64,
    Float32,
    Float64,
    Index,
    /// Variable-length list of scalar elements.
    VarList(ElementType),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSpec {
    pub name: String,
    pub field_type: FieldType,
}

impl FieldSpec {
    pub fn new(name: impl Into<String>, field_type: FieldType) -> Self {
        FieldSpec { name: name.into(), field_type }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schema {
    pub fields: Vec<FieldSpec>,
}

impl Schema {
    pub fn new(fields: Vec<FieldSpec>) -> Result<Self> {
        let schema = Schema { fields };
        schema.validate()?;
        Ok(schema)
    }

    /// Field names must be unique and non-empty; list elements must be scalar.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for field in &self.fields {
            if field.name.is_empty() {
                return Err(Error::Schema("empty field name".into()));
            }
            if !seen.insert(field.name.as_str()) {
                return Err(Error::Schema(format!("duplicate field name `{}`", field.name)));
            }
        }
        Ok(())
    }
}

/// Role a column plays after decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Scalar,
    /// Cumulative element counts for a list field, one per entry.
    ListOffset,
    /// Elements of a list field; entry boundaries live in `offset_column`.
    ListElement { offset_column: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDescriptor {
    pub column_id: u64,
    pub element_type: ElementType,
    pub source_field: String,
    pub role: ColumnRole,
}

impl ColumnDescriptor {
    pub fn element_size(&self) -> u64 {
        self.element_type.size()
    }
}

/// Flattens a schema into storage columns in deterministic order: fields in
/// schema order, each list field contributing its offset column immediately
/// followed by its element column. Column ids are dense and start at 0.
pub fn decompose_schema(schema: &Schema) -> Result<Vec<ColumnDescriptor>> {
    schema.validate()?;
    let mut columns = Vec::new();
    for field in &schema.fields {
        let id = columns.len() as u64;
        match field.field_type {
            FieldType::Int32 => columns.push(scalar(id, ElementType::Int32, field)),
            FieldType::Int64 => columns.push(scalar(id, ElementType::Int64, field)),
            FieldType::Float32 => columns.push(scalar(id, ElementType::Float32, field)),
            FieldType::Float64 => columns.push(scalar(id, ElementType::Float64, field)),
            FieldType::Index => columns.push(scalar(id, ElementType::Index, field)),
            FieldType::VarList(element) => {
                columns.push(ColumnDescriptor {
                    column_id: id,
                    element_type: ElementType::Index,
                    source_field: field.name.clone(),
                    role: ColumnRole::ListOffset,
                });
                columns.push(ColumnDescriptor {
                    column_id: id + 1,
                    element_type: element,
                    source_field: field.name.clone(),
                    role: ColumnRole::ListElement { offset_column: id },
                });
            }
        }
    }
    Ok(columns)
}

fn scalar(id: u64, element_type: ElementType, field: &FieldSpec) -> ColumnDescriptor {
    ColumnDescriptor {
        column_id: id,
        element_type,
        source_field: field.name.clone(),
        role: ColumnRole::Scalar,
    }
}

/// Where a stored page's bytes live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Locator {
    /// Byte range in a flat backing file.
    FileRange { offset: u64, length: u64 },
    /// Range inside an object-store value.
    ObjectRef { key: ObjectKey, offset_in_value: u64, length: u64 },
}

impl Locator {
    pub fn length(&self) -> u64 {
        match *self {
            Locator::FileRange { length, .. } => length,
            Locator::ObjectRef { length, .. } => length,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageDescriptor {
    pub page_id: u64,
    pub cluster_id: u64,
    pub column_id: u64,
    /// Index of the first element, counted from the start of the column.
    pub first_element_index: u64,
    pub num_elements: u64,
    pub uncompressed_size: u64,
    pub stored_size: u64,
    /// CRC-32 of the stored (possibly compressed) bytes.
    pub checksum: u32,
    pub locator: Locator,
}

/// A page staged for commit: descriptor core plus the stored payload.
#[derive(Debug, Clone, PartialEq)]
pub struct StagedPage {
    pub page_id: u64,
    pub cluster_id: u64,
    pub column_id: u64,
    pub first_element_index: u64,
    pub num_elements: u64,
    pub uncompressed_size: u64,
    /// Stored bytes, already run through the dataset codec.
    pub payload: Vec<u8>,
}

impl StagedPage {
    pub fn stored_size(&self) -> u64 {
        self.payload.len() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDescriptor {
    pub cluster_id: u64,
    pub first_entry: u64,
    pub num_entries: u64,
    /// Page groups keyed by column id; pages sorted by first element index.
    pub page_groups: BTreeMap<u64, Vec<PageDescriptor>>,
}

impl ClusterDescriptor {
    pub fn total_pages(&self) -> u64 {
        self.page_groups.values().map(|g| g.len() as u64).sum()
    }

    pub fn group(&self, column_id: u64) -> &[PageDescriptor] {
        self.page_groups.get(&column_id).map(|g| g.as_slice()).unwrap_or(&[])
    }

    /// Page groups must be non-empty and contiguous in element order, with
    /// ids matching the cluster and the group key.
    pub fn validate(&self) -> Result<()> {
        for (&column_id, group) in &self.page_groups {
            if group.is_empty() {
                return Err(Error::Format(format!(
                    "cluster {}: empty page group for column {column_id}",
                    self.cluster_id
                )));
            }
            let mut next = group[0].first_element_index;
            for page in group {
                if page.cluster_id != self.cluster_id || page.column_id != column_id {
                    return Err(Error::Format(format!(
                        "page {} misfiled in cluster {} column {column_id}",
                        page.page_id, self.cluster_id
                    )));
                }
                if page.num_elements == 0 {
                    return Err(Error::Format(format!("page {} is empty", page.page_id)));
                }
                if page.first_element_index != next {
                    return Err(Error::Format(format!(
                        "page {} breaks element continuity in cluster {} column {column_id}",
                        page.page_id, self.cluster_id
                    )));
                }
                next += page.num_elements;
            }
        }
        Ok(())
    }
}

/// Splits a column buffer into page payloads. Every page holds
/// `page_size_target / element_size` whole elements except a shorter final
/// page. Empty input yields no pages.
pub fn slice_into_pages(data: &[u8], element_size: u64, page_size_target: u64) -> Result<Vec<&[u8]>> {
    if element_size == 0 {
        return Err(Error::Config("element size must be positive".into()));
    }
    if page_size_target < element_size {
        return Err(Error::Config(format!(
            "page size target {page_size_target} smaller than element size {element_size}"
        )));
    }
    if data.len() as u64 % element_size != 0 {
        return Err(Error::Config(format!(
            "column buffer of {} bytes is not a multiple of element size {element_size}",
            data.len()
        )));
    }
    let bytes_per_page = (page_size_target / element_size) * element_size;
    Ok(data.chunks(bytes_per_page as usize).collect())
}

/// Splits `num_entries` into consecutive `(first_entry, num_entries)` ranges
/// of at most `cluster_entries` each.
pub fn cluster_entry_ranges(num_entries: u64, cluster_entries: u64) -> Result<Vec<(u64, u64)>> {
    if cluster_entries == 0 {
        return Err(Error::Config("cluster entry count must be positive".into()));
    }
    let mut ranges = Vec::new();
    let mut first = 0;
    while first < num_entries {
        let count = cluster_entries.min(num_entries - first);
        ranges.push((first, count));
        first += count;
    }
    Ok(ranges)
}

/// One column's in-memory data.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnBuffer {
    pub descriptor: ColumnDescriptor,
    pub data: Vec<u8>,
}

impl ColumnBuffer {
    pub fn num_elements(&self) -> u64 {
        self.data.len() as u64 / self.descriptor.element_size()
    }
}

/// A fully materialized dataset: schema plus one buffer per storage column.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalDataset {
    pub schema: Schema,
    pub columns: Vec<ColumnBuffer>,
    pub num_entries: u64,
}

impl LogicalDataset {
    pub fn new(schema: Schema, buffers: Vec<Vec<u8>>, num_entries: u64) -> Result<Self> {
        let descriptors = decompose_schema(&schema)?;
        if buffers.len() != descriptors.len() {
            return Err(Error::Schema(format!(
                "schema decomposes into {} columns, got {} buffers",
                descriptors.len(),
                buffers.len()
            )));
        }
        let columns: Vec<ColumnBuffer> = descriptors
            .into_iter()
            .zip(buffers)
            .map(|(descriptor, data)| ColumnBuffer { descriptor, data })
            .collect();
        let dataset = LogicalDataset { schema, columns, num_entries };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn validate(&self) -> Result<()> {
        for column in &self.columns {
            let size = column.descriptor.element_size();
            if column.data.len() as u64 % size != 0 {
                return Err(Error::Schema(format!(
                    "column {} buffer is not a multiple of its element size",
                    column.descriptor.column_id
                )));
            }
            match column.descriptor.role {
                ColumnRole::Scalar | ColumnRole::ListOffset => {
                    if column.num_elements() != self.num_entries {
                        return Err(Error::Schema(format!(
                            "column {} has {} elements, expected one per entry ({})",
                            column.descriptor.column_id,
                            column.num_elements(),
                            self.num_entries
                        )));
                    }
                }
                ColumnRole::ListElement { offset_column } => {
                    let offsets = &self.columns[offset_column as usize];
                    let mut prev = 0u64;
                    for i in 0..offsets.num_elements() {
                        let value = offset_value(&offsets.data, i);
                        if value < prev {
                            return Err(Error::Schema(format!(
                                "offset column {offset_column} not monotone at entry {i}"
                            )));
                        }
                        prev = value;
                    }
                    if column.num_elements() != prev {
                        return Err(Error::Schema(format!(
                            "column {} has {} elements, offsets imply {}",
                            column.descriptor.column_id,
                            column.num_elements(),
                            prev
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn uncompressed_bytes(&self) -> u64 {
        self.columns.iter().map(|c| c.data.len() as u64).sum()
    }

    /// Element index range of `column_id` covering entries `[entry0, entry1)`.
    pub fn element_range(&self, column_id: u64, entry0: u64, entry1: u64) -> (u64, u64) {
        let column = &self.columns[column_id as usize];
        match column.descriptor.role {
            ColumnRole::Scalar | ColumnRole::ListOffset => (entry0, entry1),
            ColumnRole::ListElement { offset_column } => {
                let offsets = &self.columns[offset_column as usize].data;
                let start = if entry0 == 0 { 0 } else { offset_value(offsets, entry0 - 1) };
                let end = if entry1 == 0 { 0 } else { offset_value(offsets, entry1 - 1) };
                (start, end)
            }
        }
    }

    pub fn column_slice(&self, column_id: u64, elem0: u64, elem1: u64) -> &[u8] {
        let column = &self.columns[column_id as usize];
        let size = column.descriptor.element_size();
        &column.data[(elem0 * size) as usize..(elem1 * size) as usize]
    }
}

fn offset_value(data: &[u8], index: u64) -> u64 {
    let at = (index * 8) as usize;
    u64::from_le_bytes(data[at..at + 8].try_into().unwrap())
}
