//! On-disk layout of a store directory.
//!
//! ```text
//! data.log  concatenated values, each preceded by a u64 LE length
//! index     sorted fixed-width records, 52 bytes each:
//!           oid low u64, oid high u64, dkey u64, akey u64,
//!           value offset u64, value length u64, crc32 u32 (all LE)
//! meta      format version u32 LE followed by a codec tag u8
//! ```
//!
//! `offset` points at the first value byte, after the length prefix. The
//! index is rewritten atomically (temp file + rename) on flush; the log is
//! append-only.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::ObjectKey;

pub(super) const META_VERSION: u32 = 1;
const RECORD_LEN: usize = 52;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) struct ValueIndex {
    pub offset: u64,
    pub length: u64,
    pub crc: u32,
}

#[derive(Debug)]
pub(super) struct StoreFiles {
    dir: PathBuf,
    writer: BufWriter<File>,
    reader: File,
    log_len: u64,
    log_dirty: bool,
    codec_tag: u8,
}

impl StoreFiles {
    /// Opens `dir` as a store, initializing the layout on first use.
    pub fn open_or_create(dir: &Path) -> Result<(Self, BTreeMap<ObjectKey, ValueIndex>)> {
        fs::create_dir_all(dir)?;
        let meta_path = dir.join("meta");
        let log_path = dir.join("data.log");
        let index_path = dir.join("index");

        let fresh = !meta_path.exists();
        if fresh {
            if log_path.exists() || index_path.exists() {
                return Err(Error::Store(format!(
                    "{} has store files but no meta; refusing to touch it",
                    dir.display()
                )));
            }
            write_atomic(&meta_path, &encode_meta(0))?;
            File::create(&log_path)?;
            File::create(&index_path)?;
        }

        let codec_tag = read_meta(&meta_path)?;
        let log_len = fs::metadata(&log_path)?.len();
        let index = load_index(&index_path, log_len)?;

        let writer = BufWriter::new(OpenOptions::new().append(true).open(&log_path)?);
        let reader = File::open(&log_path)?;
        Ok((
            StoreFiles {
                dir: dir.to_path_buf(),
                writer,
                reader,
                log_len,
                log_dirty: false,
                codec_tag,
            },
            index,
        ))
    }

    pub fn codec_tag(&self) -> u8 {
        self.codec_tag
    }

    pub fn set_codec_tag(&mut self, tag: u8) -> Result<()> {
        write_atomic(&self.dir.join("meta"), &encode_meta(tag))?;
        self.codec_tag = tag;
        Ok(())
    }

    /// Appends one length-prefixed value; returns its offset and checksum.
    pub fn append_value(&mut self, bytes: &[u8]) -> Result<(u64, u32)> {
        self.writer.write_all(&(bytes.len() as u64).to_le_bytes())?;
        self.writer.write_all(bytes)?;
        let offset = self.log_len + 8;
        self.log_len += 8 + bytes.len() as u64;
        self.log_dirty = true;
        Ok((offset, crc32fast::hash(bytes)))
    }

    /// Reads a value back and verifies its checksum.
    pub fn read_value(&mut self, at: ValueIndex) -> Result<Vec<u8>> {
        if self.log_dirty {
            self.writer.flush()?;
            self.log_dirty = false;
        }
        self.reader.seek(SeekFrom::Start(at.offset))?;
        let mut buf = vec![0u8; at.length as usize];
        self.reader.read_exact(&mut buf)?;
        if crc32fast::hash(&buf) != at.crc {
            return Err(Error::Integrity(format!(
                "value at log offset {} fails its checksum",
                at.offset
            )));
        }
        Ok(buf)
    }

    /// Flushes the log and rewrites the index from `index`.
    pub fn flush(&mut self, index: &BTreeMap<ObjectKey, ValueIndex>) -> Result<()> {
        self.writer.flush()?;
        self.log_dirty = false;
        let mut buf = Vec::with_capacity(index.len() * RECORD_LEN);
        for (key, vi) in index {
            buf.extend_from_slice(&encode_record(key, vi));
        }
        write_atomic(&self.dir.join("index"), &buf)
    }
}

fn encode_meta(codec_tag: u8) -> [u8; 5] {
    let mut out = [0u8; 5];
    out[..4].copy_from_slice(&META_VERSION.to_le_bytes());
    out[4] = codec_tag;
    out
}

fn read_meta(path: &Path) -> Result<u8> {
    let bytes = fs::read(path)?;
    if bytes.len() != 5 {
        return Err(Error::Store(format!("meta file is {} bytes, expected 5", bytes.len())));
    }
    let version = u32::from_le_bytes(bytes[..4].try_into().unwrap());
    if version != META_VERSION {
        return Err(Error::Store(format!("unsupported store version {version}")));
    }
    Ok(bytes[4])
}

fn load_index(path: &Path, log_len: u64) -> Result<BTreeMap<ObjectKey, ValueIndex>> {
    let bytes = fs::read(path)?;
    if bytes.len() % RECORD_LEN != 0 {
        return Err(Error::Store(format!(
            "index file is {} bytes, not a multiple of {RECORD_LEN}",
            bytes.len()
        )));
    }
    let mut index = BTreeMap::new();
    for record in bytes.chunks_exact(RECORD_LEN) {
        let (key, vi) = decode_record(record.try_into().unwrap());
        if vi.offset.checked_add(vi.length).map_or(true, |end| end > log_len) {
            return Err(Error::Store(format!(
                "index entry for {key} points past the end of data.log"
            )));
        }
        if index.insert(key, vi).is_some() {
            return Err(Error::Store(format!("index has a duplicate entry for {key}")));
        }
    }
    Ok(index)
}

fn encode_record(key: &ObjectKey, vi: &ValueIndex) -> [u8; RECORD_LEN] {
    let mut out = [0u8; RECORD_LEN];
    out[0..8].copy_from_slice(&(key.oid as u64).to_le_bytes());
    out[8..16].copy_from_slice(&((key.oid >> 64) as u64).to_le_bytes());
    out[16..24].copy_from_slice(&key.dkey.to_le_bytes());
    out[24..32].copy_from_slice(&key.akey.to_le_bytes());
    out[32..40].copy_from_slice(&vi.offset.to_le_bytes());
    out[40..48].copy_from_slice(&vi.length.to_le_bytes());
    out[48..52].copy_from_slice(&vi.crc.to_le_bytes());
    out
}

fn decode_record(record: &[u8; RECORD_LEN]) -> (ObjectKey, ValueIndex) {
    let word = |at: usize| u64::from_le_bytes(record[at..at + 8].try_into().unwrap());
    let oid = word(0) as u128 | (word(8) as u128) << 64;
    (
        ObjectKey { oid, dkey: word(16), akey: word(24) },
        ValueIndex {
            offset: word(32),
            length: word(40),
            crc: u32::from_le_bytes(record[48..52].try_into().unwrap()),
        },
    )
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_codec_round_trips() {
        let key = ObjectKey { oid: (7u128 << 64) | 9, dkey: 3, akey: 12 };
        let vi = ValueIndex { offset: 1024, length: 77, crc: 0xDEAD_BEEF };
        let (back_key, back_vi) = decode_record(&encode_record(&key, &vi));
        assert_eq!(back_key, key);
        assert_eq!(back_vi, vi);
    }

    #[test]
    fn values_survive_append_and_read() {
        let dir = tempfile::tempdir().unwrap();
        let (mut files, index) = StoreFiles::open_or_create(dir.path()).unwrap();
        assert!(index.is_empty());
        let (off_a, crc_a) = files.append_value(b"alpha").unwrap();
        let (off_b, crc_b) = files.append_value(b"bravo-bytes").unwrap();
        assert_eq!(off_a, 8);
        assert_eq!(off_b, 8 + 5 + 8);
        let a = files.read_value(ValueIndex { offset: off_a, length: 5, crc: crc_a }).unwrap();
        assert_eq!(a, b"alpha");
        let b = files.read_value(ValueIndex { offset: off_b, length: 11, crc: crc_b }).unwrap();
        assert_eq!(b, b"bravo-bytes");
        let bad = files.read_value(ValueIndex { offset: off_b, length: 11, crc: crc_a });
        assert!(matches!(bad, Err(Error::Integrity(_))));
    }

    #[test]
    fn foreign_directory_without_meta_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("data.log"), b"junk").unwrap();
        assert!(matches!(StoreFiles::open_or_create(dir.path()), Err(Error::Store(_))));
    }
}
