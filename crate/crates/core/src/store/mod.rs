//! Embedded object store with simulated transport timing.
//!
//! Objects are addressed by a 128-bit object id, a 64-bit distribution key
//! (dkey) and a 64-bit attribute key (akey). One call carries one or more
//! values for a single (oid, dkey) pair; `dispatch_concurrent` spreads many
//! such calls over a fixed number of lanes and charges the longest lane.
//! All timing is analytic and advances a per-session clock; data itself is
//! held durably in a store directory (see `persist` for the byte layout).
//!
//! A session owns its store directory exclusively: opening a second session
//! on the same path fails while the first is alive. Each session creates
//! exactly one operation queue, either once at open (persistent) or
//! implicitly per call (per-call policy), which differ only in how often the
//! queue creation cost is charged.
//!
//! The object id `u128::MAX` is reserved for dataset metadata (header, page
//! listing, completion marker). Writes through the metadata channel are
//! uncharged and do not touch the call counters, so counters and the clock
//! measure payload traffic only.

mod cost;
mod persist;

pub use cost::{concurrent_elapsed, CostModel, SimClock};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

use persist::{StoreFiles, ValueIndex};

/// Reserved object id for dataset metadata.
pub const META_OID: u128 = u128::MAX;
pub const META_DKEY: u64 = 0;
pub const META_AKEY_HEADER: u64 = 0;
pub const META_AKEY_LISTING: u64 = 1;
pub const META_AKEY_COMPLETE: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectKey {
    pub oid: u128,
    pub dkey: u64,
    pub akey: u64,
}

impl ObjectKey {
    pub const fn new(oid: u128, dkey: u64, akey: u64) -> Self {
        ObjectKey { oid, dkey, akey }
    }
}

impl fmt::Display for ObjectKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(oid={:#x}, dkey={}, akey={})", self.oid, self.dkey, self.akey)
    }
}

/// When the queue creation cost is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueuePolicy {
    /// Once, when the session opens.
    Persistent,
    /// Added to every call, modeling setup and teardown around each request.
    PerCall,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpQueue {
    pub session_id: u64,
    /// Simulated time at which the queue came up.
    pub created_at: f64,
    pub ops_issued: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SessionStats {
    pub ops_issued: u64,
    pub update_calls: u64,
    pub fetch_calls: u64,
    pub bytes_updated: u64,
    pub bytes_fetched: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOptions {
    pub cost_model: CostModel,
    pub queue_policy: QueuePolicy,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions { cost_model: CostModel::default(), queue_policy: QueuePolicy::Persistent }
    }
}

/// One write call: values for distinct akeys under a single (oid, dkey).
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateBatch {
    pub oid: u128,
    pub dkey: u64,
    pub items: Vec<(u64, Vec<u8>)>,
}

/// One read call: akeys to fetch under a single (oid, dkey).
#[derive(Debug, Clone, PartialEq)]
pub struct FetchBatch {
    pub oid: u128,
    pub dkey: u64,
    pub akeys: Vec<u64>,
}

#[derive(Debug)]
struct Inner {
    files: StoreFiles,
    index: BTreeMap<ObjectKey, ValueIndex>,
    clock: SimClock,
    cost: CostModel,
    policy: QueuePolicy,
    queue_created_at: f64,
    stats: SessionStats,
    fetch_trace: Vec<ObjectKey>,
}

#[derive(Debug)]
pub struct Session {
    path: PathBuf,
    session_id: u64,
    inner: Mutex<Inner>,
}

fn registry() -> &'static Mutex<BTreeSet<PathBuf>> {
    static REGISTRY: OnceLock<Mutex<BTreeSet<PathBuf>>> = OnceLock::new();
    REGISTRY.get_or_init(|| Mutex::new(BTreeSet::new()))
}

static NEXT_SESSION_ID: AtomicU64 = AtomicU64::new(1);

impl Session {
    /// Opens (creating if necessary) the store at `path`. Fails if another
    /// live session owns the path, or if the store holds a dataset header
    /// without its completion marker (an aborted import).
    pub fn open(path: &Path, options: SessionOptions) -> Result<Session> {
        options.cost_model.validate()?;
        std::fs::create_dir_all(path)?;
        let canonical = path.canonicalize()?;
        {
            let mut live = registry().lock().unwrap();
            if !live.insert(canonical.clone()) {
                return Err(Error::Store(format!(
                    "a live session already owns {}",
                    canonical.display()
                )));
            }
        }
        let opened = StoreFiles::open_or_create(&canonical).and_then(|(files, index)| {
            let header = ObjectKey::new(META_OID, META_DKEY, META_AKEY_HEADER);
            let marker = ObjectKey::new(META_OID, META_DKEY, META_AKEY_COMPLETE);
            if index.contains_key(&header) && !index.contains_key(&marker) {
                return Err(Error::Store(format!(
                    "{} holds an incomplete dataset import (missing completion marker)",
                    canonical.display()
                )));
            }
            Ok((files, index))
        });
        let (files, index) = match opened {
            Ok(v) => v,
            Err(e) => {
                registry().lock().unwrap().remove(&canonical);
                return Err(e);
            }
        };
        let mut clock = SimClock::default();
        if options.queue_policy == QueuePolicy::Persistent {
            clock.advance(options.cost_model.queue_create_cost);
        }
        let queue_created_at = clock.elapsed();
        Ok(Session {
            path: canonical,
            session_id: NEXT_SESSION_ID.fetch_add(1, Ordering::Relaxed),
            inner: Mutex::new(Inner {
                files,
                index,
                clock,
                cost: options.cost_model,
                policy: options.queue_policy,
                queue_created_at,
                stats: SessionStats::default(),
                fetch_trace: Vec::new(),
            }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Flushes log and index to disk and ends the session.
    pub fn close(self) -> Result<()> {
        let mut inner = self.inner.lock().unwrap();
        let index = std::mem::take(&mut inner.index);
        let res = inner.files.flush(&index);
        inner.index = index;
        res
    }

    /// Writes `items` (distinct akeys with payloads) under one (oid, dkey).
    /// Existing values are overwritten. Charges one call.
    pub fn update_batch(&self, oid: u128, dkey: u64, items: &[(u64, &[u8])]) -> Result<()> {
        let mut inner = self.inner.lock().unwrap();
        let bytes = validate_update(oid, items)?;
        let cost = inner.one_call_cost(items.len() as u64, bytes);
        inner.clock.advance(cost);
        inner.stats.ops_issued += 1;
        inner.stats.update_calls += 1;
        inner.stats.bytes_updated += bytes;
        for &(akey, payload) in items {
            inner.write_value(ObjectKey::new(oid, dkey, akey), payload)?;
        }
        Ok(())
    }

    /// Reads values for `akeys` under one (oid, dkey), in request order.
    /// All requested keys must exist. Charges one call.
    pub fn fetch_batch(&self, oid: u128, dkey: u64, akeys: &[u64]) -> Result<Vec<Vec<u8>>> {
        let mut inner = self.inner.lock().unwrap();
        let bytes = validate_fetch(&inner.index, oid, dkey, akeys)?;
        let cost = inner.one_call_cost(akeys.len() as u64, bytes);
        inner.clock.advance(cost);
        inner.stats.ops_issued += 1;
        inner.stats.fetch_calls += 1;
        inner.stats.bytes_fetched += bytes;
        inner.read_akeys(oid, dkey, akeys)
    }

    /// Issues many update batches at once. Batches must target pairwise
    /// distinct (oid, dkey) pairs; the clock advances by the longest lane.
    pub fn dispatch_concurrent(&self, batches: Vec<UpdateBatch>) -> Result<()> {
        let mut inner = self.inner.lock().unwrap();
        let mut costs = Vec::with_capacity(batches.len());
        let mut pairs = BTreeSet::new();
        let mut total_bytes = 0u64;
        for batch in &batches {
            if !pairs.insert((batch.oid, batch.dkey)) {
                return Err(Error::Request(format!(
                    "concurrent dispatch repeats (oid={:#x}, dkey={})",
                    batch.oid, batch.dkey
                )));
            }
            let refs: Vec<(u64, &[u8])> =
                batch.items.iter().map(|(a, v)| (*a, v.as_slice())).collect();
            let bytes = validate_update(batch.oid, &refs)?;
            total_bytes += bytes;
            costs.push(inner.one_call_cost(batch.items.len() as u64, bytes));
        }
        let lanes = inner.cost.parallel_lanes;
        inner.clock.advance(concurrent_elapsed(&costs, lanes));
        inner.stats.ops_issued += batches.len() as u64;
        inner.stats.update_calls += batches.len() as u64;
        inner.stats.bytes_updated += total_bytes;
        for batch in &batches {
            for (akey, payload) in &batch.items {
                inner.write_value(ObjectKey::new(batch.oid, batch.dkey, *akey), payload)?;
            }
        }
        Ok(())
    }

    /// Issues many fetch batches at once, returning values per batch in
    /// batch order. Same pairing and timing rules as `dispatch_concurrent`.
    pub fn fetch_concurrent(&self, batches: &[FetchBatch]) -> Result<Vec<Vec<Vec<u8>>>> {
        let mut inner = self.inner.lock().unwrap();
        let mut costs = Vec::with_capacity(batches.len());
        let mut pairs = BTreeSet::new();
        let mut total_bytes = 0u64;
        for batch in batches {
            if !pairs.insert((batch.oid, batch.dkey)) {
                return Err(Error::Request(format!(
                    "concurrent fetch repeats (oid={:#x}, dkey={})",
                    batch.oid, batch.dkey
                )));
            }
            let bytes = validate_fetch(&inner.index, batch.oid, batch.dkey, &batch.akeys)?;
            total_bytes += bytes;
            costs.push(inner.one_call_cost(batch.akeys.len() as u64, bytes));
        }
        let lanes = inner.cost.parallel_lanes;
        inner.clock.advance(concurrent_elapsed(&costs, lanes));
        inner.stats.ops_issued += batches.len() as u64;
        inner.stats.fetch_calls += batches.len() as u64;
        inner.stats.bytes_fetched += total_bytes;
        let mut out = Vec::with_capacity(batches.len());
        for batch in batches {
            out.push(inner.read_akeys(batch.oid, batch.dkey, &batch.akeys)?);
        }
        Ok(out)
    }

    /// All (dkey, akey) pairs stored under `oid`, in sorted order.
    /// Diagnostic; does not touch the clock or counters.
    pub fn list_keys(&self, oid: u128) -> Vec<(u64, u64)> {
        let inner = self.inner.lock().unwrap();
        inner
            .index
            .range(ObjectKey::new(oid, 0, 0)..=ObjectKey::new(oid, u64::MAX, u64::MAX))
            .map(|(k, _)| (k.dkey, k.akey))
            .collect()
    }

    /// Full key/value dump of the data namespace (metadata excluded), in key
    /// order. Diagnostic; uncharged.
    pub fn dump(&self) -> Result<Vec<(ObjectKey, Vec<u8>)>> {
        let mut inner = self.inner.lock().unwrap();
        let entries: Vec<(ObjectKey, ValueIndex)> = inner
            .index
            .iter()
            .filter(|(k, _)| k.oid != META_OID)
            .map(|(k, v)| (*k, *v))
            .collect();
        let mut out = Vec::with_capacity(entries.len());
        for (key, vi) in entries {
            out.push((key, inner.files.read_value(vi)?));
        }
        Ok(out)
    }

    /// Writes a metadata value. Uncharged and uncounted.
    pub fn put_meta(&self, akey: u64, bytes: &[u8]) -> Result<()> {
        let mut inner = self.inner.lock().unwrap();
        inner.write_value(ObjectKey::new(META_OID, META_DKEY, akey), bytes)
    }

    /// Reads a metadata value, or `None` if absent. Uncharged and uncounted.
    pub fn get_meta(&self, akey: u64) -> Result<Option<Vec<u8>>> {
        let mut inner = self.inner.lock().unwrap();
        match inner.index.get(&ObjectKey::new(META_OID, META_DKEY, akey)) {
            Some(&vi) => Ok(Some(inner.files.read_value(vi)?)),
            None => Ok(None),
        }
    }

    /// True if the store holds no keys at all, metadata included.
    pub fn is_empty(&self) -> bool {
        self.inner.lock().unwrap().index.is_empty()
    }

    pub fn codec_tag(&self) -> u8 {
        self.inner.lock().unwrap().files.codec_tag()
    }

    pub fn set_codec_tag(&self, tag: u8) -> Result<()> {
        self.inner.lock().unwrap().files.set_codec_tag(tag)
    }

    pub fn elapsed(&self) -> f64 {
        self.inner.lock().unwrap().clock.elapsed()
    }

    pub fn stats(&self) -> SessionStats {
        self.inner.lock().unwrap().stats
    }

    pub fn queue(&self) -> OpQueue {
        let inner = self.inner.lock().unwrap();
        OpQueue {
            session_id: self.session_id,
            created_at: inner.queue_created_at,
            ops_issued: inner.stats.ops_issued,
        }
    }

    /// Keys fetched so far, in fetch order. Diagnostic.
    pub fn fetch_trace(&self) -> Vec<ObjectKey> {
        self.inner.lock().unwrap().fetch_trace.clone()
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        if let Ok(mut inner) = self.inner.lock() {
            let index = std::mem::take(&mut inner.index);
            let _ = inner.files.flush(&index);
            inner.index = index;
        }
        registry().lock().unwrap().remove(&self.path);
    }
}

impl Inner {
    fn one_call_cost(&self, items: u64, bytes: u64) -> f64 {
        let mut cost = self.cost.call_cost(items, bytes);
        if self.policy == QueuePolicy::PerCall {
            cost += self.cost.queue_create_cost;
        }
        cost
    }

    fn write_value(&mut self, key: ObjectKey, payload: &[u8]) -> Result<()> {
        let (offset, crc) = self.files.append_value(payload)?;
        self.index.insert(key, ValueIndex { offset, length: payload.len() as u64, crc });
        Ok(())
    }

    fn read_akeys(&mut self, oid: u128, dkey: u64, akeys: &[u64]) -> Result<Vec<Vec<u8>>> {
        let mut out = Vec::with_capacity(akeys.len());
        for &akey in akeys {
            let key = ObjectKey::new(oid, dkey, akey);
            let vi = *self.index.get(&key).expect("validated before charge");
            out.push(self.files.read_value(vi)?);
            self.fetch_trace.push(key);
        }
        Ok(out)
    }
}

fn validate_update(oid: u128, items: &[(u64, &[u8])]) -> Result<u64> {
    if oid == META_OID {
        return Err(Error::Request("object id is reserved for metadata".into()));
    }
    if items.is_empty() {
        return Err(Error::Request("update batch carries no items".into()));
    }
    let mut akeys = BTreeSet::new();
    let mut bytes = 0u64;
    for (akey, payload) in items {
        if !akeys.insert(*akey) {
            return Err(Error::Request(format!("update batch repeats akey {akey}")));
        }
        bytes += payload.len() as u64;
    }
    Ok(bytes)
}

fn validate_fetch(
    index: &BTreeMap<ObjectKey, ValueIndex>,
    oid: u128,
    dkey: u64,
    akeys: &[u64],
) -> Result<u64> {
    if oid == META_OID {
        return Err(Error::Request("object id is reserved for metadata".into()));
    }
    if akeys.is_empty() {
        return Err(Error::Request("fetch batch requests no akeys".into()));
    }
    let mut seen = BTreeSet::new();
    let mut bytes = 0u64;
    for &akey in akeys {
        if !seen.insert(akey) {
            return Err(Error::Request(format!("fetch batch repeats akey {akey}")));
        }
        match index.get(&ObjectKey::new(oid, dkey, akey)) {
            Some(vi) => bytes += vi.length,
            None => return Err(Error::NotFound { oid, dkey, akey }),
        }
    }
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    fn open_tmp(policy: QueuePolicy) -> (tempfile::TempDir, Session) {
        let dir = tempfile::tempdir().unwrap();
        let session = Session::open(
            dir.path(),
            SessionOptions { cost_model: CostModel::default(), queue_policy: policy },
        )
        .unwrap();
        (dir, session)
    }

    #[test]
    fn persistent_queue_charges_once_at_open() {
        let (_dir, s) = open_tmp(QueuePolicy::Persistent);
        assert!((s.elapsed() - 10e-3).abs() < EPS);
        assert!((s.queue().created_at - 10e-3).abs() < EPS);
        s.update_batch(1, 0, &[(0, b"abcd".as_slice())]).unwrap();
        let expected = 10e-3 + 100e-6 + 10e-6 + 4.0 / 12.5e9;
        assert!((s.elapsed() - expected).abs() < EPS);
    }

    #[test]
    fn per_call_queue_charges_every_call() {
        let (_dir, s) = open_tmp(QueuePolicy::PerCall);
        assert!(s.elapsed().abs() < EPS);
        s.update_batch(1, 0, &[(0, b"abcd".as_slice())]).unwrap();
        s.fetch_batch(1, 0, &[0]).unwrap();
        let call_w = 10e-3 + 100e-6 + 10e-6 + 4.0 / 12.5e9;
        assert!((s.elapsed() - (call_w + call_w)).abs() < EPS);
    }

    #[test]
    fn batching_amortizes_per_call_latency() {
        let (_dir, s) = open_tmp(QueuePolicy::Persistent);
        let payload = vec![0u8; 100];
        let items: Vec<(u64, &[u8])> = (0..10).map(|a| (a, payload.as_slice())).collect();
        let t0 = s.elapsed();
        s.update_batch(7, 3, &items).unwrap();
        let one_batch = s.elapsed() - t0;
        let expected = 100e-6 + 10.0 * 10e-6 + 1000.0 / 12.5e9;
        assert!((one_batch - expected).abs() < EPS);
        // Ten single-item calls would cost ten latencies instead of one.
        let singles = 10.0 * (100e-6 + 10e-6 + 100.0 / 12.5e9);
        assert!(one_batch < singles);
    }

    #[test]
    fn read_your_writes_and_overwrite() {
        let (_dir, s) = open_tmp(QueuePolicy::Persistent);
        s.update_batch(5, 1, &[(2, b"first".as_slice())]).unwrap();
        assert_eq!(s.fetch_batch(5, 1, &[2]).unwrap(), vec![b"first".to_vec()]);
        s.update_batch(5, 1, &[(2, b"second".as_slice())]).unwrap();
        assert_eq!(s.fetch_batch(5, 1, &[2]).unwrap(), vec![b"second".to_vec()]);
    }

    #[test]
    fn values_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let s = Session::open(dir.path(), SessionOptions::default()).unwrap();
        s.update_batch(9, 0, &[(0, b"keep".as_slice()), (1, b"these".as_slice())]).unwrap();
        s.close().unwrap();
        let s = Session::open(dir.path(), SessionOptions::default()).unwrap();
        let got = s.fetch_batch(9, 0, &[0, 1]).unwrap();
        assert_eq!(got, vec![b"keep".to_vec(), b"these".to_vec()]);
    }

    #[test]
    fn second_session_on_same_path_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let s1 = Session::open(dir.path(), SessionOptions::default()).unwrap();
        let err = Session::open(dir.path(), SessionOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Store(_)));
        assert!(err.to_string().contains("live session"));
        drop(s1);
        Session::open(dir.path(), SessionOptions::default()).unwrap();
    }

    #[test]
    fn fetch_of_missing_key_names_it() {
        let (_dir, s) = open_tmp(QueuePolicy::Persistent);
        s.update_batch(4, 2, &[(0, b"x".as_slice())]).unwrap();
        let before = s.stats();
        match s.fetch_batch(4, 2, &[0, 99]) {
            Err(Error::NotFound { oid, dkey, akey }) => {
                assert_eq!((oid, dkey, akey), (4, 2, 99));
            }
            other => panic!("expected NotFound, got {other:?}"),
        }
        // Failed validation charges nothing.
        assert_eq!(s.stats(), before);
    }

    #[test]
    fn dispatch_spreads_equal_batches_over_lanes() {
        let (_dir, s) = open_tmp(QueuePolicy::Persistent);
        let mut model = CostModel::default();
        model.parallel_lanes = 4;
        drop(s);
        let dir = tempfile::tempdir().unwrap();
        let s = Session::open(
            dir.path(),
            SessionOptions { cost_model: model, queue_policy: QueuePolicy::Persistent },
        )
        .unwrap();
        let payload = vec![1u8; 256];
        let batches: Vec<UpdateBatch> = (0..4)
            .map(|d| UpdateBatch { oid: 1, dkey: d, items: vec![(0, payload.clone())] })
            .collect();
        let t0 = s.elapsed();
        s.dispatch_concurrent(batches).unwrap();
        let one = 100e-6 + 10e-6 + 256.0 / 12.5e9;
        assert!((s.elapsed() - t0 - one).abs() < EPS);
        assert_eq!(s.stats().update_calls, 4);
        assert_eq!(s.queue().ops_issued, 4);
    }

    #[test]
    fn dispatch_rejects_repeated_pairs() {
        let (_dir, s) = open_tmp(QueuePolicy::Persistent);
        let batches = vec![
            UpdateBatch { oid: 1, dkey: 0, items: vec![(0, vec![1])] },
            UpdateBatch { oid: 1, dkey: 0, items: vec![(1, vec![2])] },
        ];
        assert!(matches!(s.dispatch_concurrent(batches), Err(Error::Request(_))));
    }

    #[test]
    fn fetch_concurrent_returns_batch_order_and_traces() {
        let (_dir, s) = open_tmp(QueuePolicy::Persistent);
        s.update_batch(1, 0, &[(0, b"a".as_slice()), (1, b"b".as_slice())]).unwrap();
        s.update_batch(2, 0, &[(0, b"c".as_slice())]).unwrap();
        let got = s
            .fetch_concurrent(&[
                FetchBatch { oid: 2, dkey: 0, akeys: vec![0] },
                FetchBatch { oid: 1, dkey: 0, akeys: vec![1, 0] },
            ])
            .unwrap();
        assert_eq!(got, vec![vec![b"c".to_vec()], vec![b"b".to_vec(), b"a".to_vec()]]);
        let trace = s.fetch_trace();
        assert_eq!(
            trace,
            vec![
                ObjectKey::new(2, 0, 0),
                ObjectKey::new(1, 0, 1),
                ObjectKey::new(1, 0, 0),
            ]
        );
    }

    #[test]
    fn list_keys_is_sorted_and_scoped() {
        let (_dir, s) = open_tmp(QueuePolicy::Persistent);
        s.update_batch(3, 2, &[(5, b"x".as_slice())]).unwrap();
        s.update_batch(3, 1, &[(9, b"y".as_slice()), (4, b"z".as_slice())]).unwrap();
        s.update_batch(8, 0, &[(0, b"w".as_slice())]).unwrap();
        assert_eq!(s.list_keys(3), vec![(1, 4), (1, 9), (2, 5)]);
        assert_eq!(s.list_keys(8), vec![(0, 0)]);
        assert!(s.list_keys(42).is_empty());
    }

    #[test]
    fn metadata_channel_is_uncharged_and_invisible() {
        let (_dir, s) = open_tmp(QueuePolicy::Persistent);
        let t0 = s.elapsed();
        s.put_meta(META_AKEY_HEADER, b"hdr").unwrap();
        assert_eq!(s.get_meta(META_AKEY_HEADER).unwrap().unwrap(), b"hdr");
        assert_eq!(s.get_meta(META_AKEY_LISTING).unwrap(), None);
        assert!((s.elapsed() - t0).abs() < EPS);
        assert_eq!(s.stats(), SessionStats::default());
        assert!(s.dump().unwrap().is_empty());
    }

    #[test]
    fn data_path_cannot_touch_reserved_oid() {
        let (_dir, s) = open_tmp(QueuePolicy::Persistent);
        let err = s.update_batch(META_OID, 0, &[(7, b"x".as_slice())]).unwrap_err();
        assert!(matches!(err, Error::Request(_)));
        assert!(matches!(s.fetch_batch(META_OID, 0, &[7]), Err(Error::Request(_))));
    }

    #[test]
    fn header_without_completion_marker_blocks_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let s = Session::open(dir.path(), SessionOptions::default()).unwrap();
        s.put_meta(META_AKEY_HEADER, b"hdr").unwrap();
        s.close().unwrap();
        let err = Session::open(dir.path(), SessionOptions::default()).unwrap_err();
        assert!(err.to_string().contains("incomplete"));

        let dir2 = tempfile::tempdir().unwrap();
        let s = Session::open(dir2.path(), SessionOptions::default()).unwrap();
        s.put_meta(META_AKEY_HEADER, b"hdr").unwrap();
        s.put_meta(META_AKEY_COMPLETE, b"").unwrap();
        s.close().unwrap();
        Session::open(dir2.path(), SessionOptions::default()).unwrap();
    }

    #[test]
    fn corrupt_index_is_rejected_at_open() {
        let dir = tempfile::tempdir().unwrap();
        let s = Session::open(dir.path(), SessionOptions::default()).unwrap();
        s.update_batch(1, 0, &[(0, b"value".as_slice())]).unwrap();
        s.close().unwrap();
        let index_path = dir.path().join("index");
        let mut bytes = std::fs::read(&index_path).unwrap();
        bytes.truncate(bytes.len() - 1);
        std::fs::write(&index_path, &bytes).unwrap();
        assert!(matches!(
            Session::open(dir.path(), SessionOptions::default()),
            Err(Error::Store(_))
        ));
    }

    #[test]
    fn corrupt_value_fails_integrity_on_fetch() {
        let dir = tempfile::tempdir().unwrap();
        let s = Session::open(dir.path(), SessionOptions::default()).unwrap();
        s.update_batch(1, 0, &[(0, vec![7u8; 64].as_slice())]).unwrap();
        s.close().unwrap();
        let log_path = dir.path().join("data.log");
        let mut bytes = std::fs::read(&log_path).unwrap();
        let end = bytes.len();
        bytes[end - 1] ^= 0xFF;
        std::fs::write(&log_path, &bytes).unwrap();
        let s = Session::open(dir.path(), SessionOptions::default()).unwrap();
        assert!(matches!(s.fetch_batch(1, 0, &[0]), Err(Error::Integrity(_))));
    }
}
