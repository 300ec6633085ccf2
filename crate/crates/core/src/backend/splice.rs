//! Scatter-gather splicing: consecutive pages of one page group are packed
//! into blocks so each block travels as a single store value. Packing is
//! greedy first-fit in element order; a block closes when the next page
//! would push it past the target size. A page larger than the target ships
//! alone in its own block.

use crate::error::{Error, Result};
use crate::store::ObjectKey;

use super::MappingKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockMember {
    pub page_id: u64,
    /// Byte offset of the page inside the block value.
    pub offset: u64,
}

/// One spliced block: an ordered run of pages from a single page group,
/// stored under the key derived from its first member page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SgBlock {
    pub cluster_id: u64,
    pub column_id: u64,
    pub key: ObjectKey,
    pub total_size: u64,
    pub members: Vec<BlockMember>,
}

/// Packs a page group, given `(page_id, stored_size)` in element order,
/// into blocks of at most `target_block_size` bytes (oversized single pages
/// excepted).
pub fn pack_page_group(
    cluster_id: u64,
    column_id: u64,
    pages: &[(u64, u64)],
    target_block_size: u64,
    mapping: MappingKind,
) -> Result<Vec<SgBlock>> {
    if target_block_size == 0 {
        return Err(Error::Config("target block size must be positive".into()));
    }
    let mut blocks = Vec::new();
    let mut members: Vec<BlockMember> = Vec::new();
    let mut size = 0u64;
    let seal = |members: &mut Vec<BlockMember>, size: &mut u64, blocks: &mut Vec<SgBlock>| {
        if members.is_empty() {
            return;
        }
        let first = members[0].page_id;
        blocks.push(SgBlock {
            cluster_id,
            column_id,
            key: mapping.map(cluster_id, column_id, first),
            total_size: *size,
            members: std::mem::take(members),
        });
        *size = 0;
    };
    for &(page_id, stored_size) in pages {
        if !members.is_empty() && size + stored_size > target_block_size {
            seal(&mut members, &mut size, &mut blocks);
        }
        members.push(BlockMember { page_id, offset: size });
        size += stored_size;
    }
    seal(&mut members, &mut size, &mut blocks);
    Ok(blocks)
}
