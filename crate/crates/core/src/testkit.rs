//! Deterministic builders for randomized test datasets. Kept in the library
//! (not behind cfg(test)) so integration tests and the CLI test suite can
//! share them; not intended for production use.

use crate::model::{ElementType, FieldSpec, FieldType, LogicalDataset, Schema};
use crate::workload::mix64;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Small sequential splitmix64 generator for tests.
#[derive(Debug, Clone)]
pub struct TestRng {
    state: u64,
}

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    /// Uniform value in [0, n).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        self.next_u64() % n
    }

    /// Uniform value in [lo, hi].
    pub fn range(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.below(hi - lo + 1)
    }

    pub fn chance(&mut self, percent: u64) -> bool {
        self.below(100) < percent
    }

    pub fn bytes(&mut self, len: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(len + 8);
        while out.len() < len {
            out.extend_from_slice(&self.next_u64().to_le_bytes());
        }
        out.truncate(len);
        out
    }
}

const SCALARS: [FieldType; 5] = [
    FieldType::Int32,
    FieldType::Int64,
    FieldType::Float32,
    FieldType::Float64,
    FieldType::Index,
];

const ELEMENTS: [ElementType; 4] = [
    ElementType::Int32,
    ElementType::Int64,
    ElementType::Float32,
    ElementType::Float64,
];

/// Random schema of 1..=6 fields mixing scalars and variable-length lists.
pub fn random_schema(rng: &mut TestRng) -> Schema {
    let fields = rng.range(1, 6);
    Schema::new(
        (0..fields)
            .map(|i| {
                let field_type = if rng.chance(30) {
                    FieldType::VarList(ELEMENTS[rng.below(ELEMENTS.len() as u64) as usize])
                } else {
                    SCALARS[rng.below(SCALARS.len() as u64) as usize]
                };
                FieldSpec::new(format!("f{i}"), field_type)
            })
            .collect(),
    )
    .unwrap()
}

/// Random dataset over a random schema with up to `max_entries` entries.
/// Scalar payloads are arbitrary bit patterns; list offsets are valid
/// monotone cumulative counts with 0..=4 elements per entry.
pub fn random_dataset(rng: &mut TestRng, max_entries: u64) -> LogicalDataset {
    let schema = random_schema(rng);
    let entries = rng.below(max_entries + 1);
    let mut buffers = Vec::new();
    for field in &schema.fields {
        match field.field_type {
            FieldType::VarList(element) => {
                let mut offsets = Vec::with_capacity((entries * 8) as usize);
                let mut total = 0u64;
                for _ in 0..entries {
                    total += rng.below(5);
                    offsets.extend_from_slice(&total.to_le_bytes());
                }
                buffers.push(offsets);
                buffers.push(rng.bytes((total * element.size()) as usize));
            }
            FieldType::Int32 => buffers.push(rng.bytes((entries * 4) as usize)),
            FieldType::Float32 => buffers.push(rng.bytes((entries * 4) as usize)),
            FieldType::Int64 | FieldType::Float64 | FieldType::Index => {
                buffers.push(rng.bytes((entries * 8) as usize))
            }
        }
    }
    LogicalDataset::new(schema, buffers, entries).unwrap()
}
