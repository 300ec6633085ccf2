//! Per-page compression. The codec applies to page payloads only; metadata
//! structures are never compressed. A dataset uses one codec throughout,
//! recorded as a 1-byte tag in its header.

use crate::error::{Error, Result};

pub const DEFAULT_ZSTD_LEVEL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodecId {
    None,
    Zstd,
}

impl CodecId {
    pub const fn tag(self) -> u8 {
        match self {
            CodecId::None => 0,
            CodecId::Zstd => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(CodecId::None),
            1 => Ok(CodecId::Zstd),
            other => Err(Error::Format(format!("unknown codec tag {other}"))),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CodecId::None),
            "zstd" => Ok(CodecId::Zstd),
            other => Err(Error::Config(format!("unknown codec `{other}` (expected none|zstd)"))),
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            CodecId::None => "none",
            CodecId::Zstd => "zstd",
        }
    }
}

/// Encodes a page payload. `level` is only consulted by `Zstd`.
pub fn compress(payload: &[u8], codec: CodecId, level: i32) -> Result<Vec<u8>> {
    if payload.is_empty() {
        return Err(Error::Request("cannot compress an empty payload".into()));
    }
    match codec {
        CodecId::None => Ok(payload.to_vec()),
        CodecId::Zstd => zstd::bulk::compress(payload, level)
            .map_err(|e| Error::Store(format!("zstd compression failed: {e}"))),
    }
}

/// Decodes stored page bytes, checking the result against the recorded
/// uncompressed size.
pub fn decompress(stored: &[u8], codec: CodecId, expected_size: u64) -> Result<Vec<u8>> {
    let out = match codec {
        CodecId::None => {
            if stored.len() as u64 != expected_size {
                return Err(Error::Integrity(format!(
                    "uncompressed page is {} bytes, expected {expected_size}",
                    stored.len()
                )));
            }
            stored.to_vec()
        }
        CodecId::Zstd => zstd::bulk::decompress(stored, expected_size as usize)
            .map_err(|e| Error::Integrity(format!("zstd decompression failed: {e}")))?,
    };
    if out.len() as u64 != expected_size {
        return Err(Error::Integrity(format!(
            "page decompressed to {} bytes, expected {expected_size}",
            out.len()
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn none_is_identity() {
        let payload = b"columnar bytes".to_vec();
        let stored = compress(&payload, CodecId::None, 0).unwrap();
        assert_eq!(stored, payload);
        let back = decompress(&stored, CodecId::None, payload.len() as u64).unwrap();
        assert_eq!(back, payload);
    }

    #[test]
    fn zstd_shrinks_repetitive_pages() {
        let payload = vec![7u8; 64 * 1024];
        let stored = compress(&payload, CodecId::Zstd, DEFAULT_ZSTD_LEVEL).unwrap();
        assert!(stored.len() < payload.len());
        let back = decompress(&stored, CodecId::Zstd, payload.len() as u64).unwrap();
        assert_eq!(back, payload);
    }

    #[test]
    fn truncated_zstd_page_is_an_integrity_error() {
        let payload = vec![42u8; 4096];
        let stored = compress(&payload, CodecId::Zstd, DEFAULT_ZSTD_LEVEL).unwrap();
        let cut = &stored[..stored.len() / 2];
        assert!(matches!(
            decompress(cut, CodecId::Zstd, payload.len() as u64),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn size_mismatch_is_an_integrity_error() {
        let stored = compress(b"abc", CodecId::None, 0).unwrap();
        assert!(matches!(decompress(&stored, CodecId::None, 5), Err(Error::Integrity(_))));
    }

    #[test]
    fn empty_payload_rejected() {
        assert!(matches!(compress(&[], CodecId::None, 0), Err(Error::Request(_))));
    }

    proptest! {
        #[test]
        fn zstd_round_trips(payload in proptest::collection::vec(any::<u8>(), 1..8192)) {
            let stored = compress(&payload, CodecId::Zstd, DEFAULT_ZSTD_LEVEL).unwrap();
            let back = decompress(&stored, CodecId::Zstd, payload.len() as u64).unwrap();
            prop_assert_eq!(back, payload);
        }
    }
}
