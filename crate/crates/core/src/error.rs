use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid schema or a request that contradicts the schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// Invalid configuration value (sizes, cost model, CLI-level knobs).
    #[error("config error: {0}")]
    Config(String),

    /// Malformed request against an otherwise healthy store.
    #[error("request error: {0}")]
    Request(String),

    /// A fetched key does not exist.
    #[error("not found: oid={oid:#x} dkey={dkey} akey={akey}")]
    NotFound { oid: u128, dkey: u64, akey: u64 },

    /// Stored bytes fail checksum or size validation.
    #[error("integrity error: {0}")]
    Integrity(String),

    /// Malformed on-disk structure (file backend, store metadata, CSV).
    #[error("format error: {0}")]
    Format(String),

    /// Store-level failure: double open, incomplete dataset, corrupt layout.
    #[error("store error: {0}")]
    Store(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
