//! Embeddable columnar dataset engine with two storage backends and a
//! simulated-cost benchmark harness.
//!
//! Datasets are schema-described tables decomposed into typed columns,
//! sliced into pages, and grouped into entry clusters ([`model`]). Pages can
//! be compressed per page ([`codec`]) and live either in a single flat file
//! ([`backend::write_file_backend`]) or in an embedded key/value object
//! store addressed DAOS-style by object id, distribution key and attribute
//! key ([`store`], [`backend`]).
//!
//! The object store charges every call against an analytic transport cost
//! model and advances a simulated clock, which makes placement strategies
//! comparable without hardware: object-per-page placement, locality-driven
//! placement (pages of one column and cluster share a distribution key and
//! coalesce into one call), and locality-driven placement with scatter-gather
//! splicing into fixed-size blocks. The [`workload`] module provides the
//! deterministic wide-table workload and its histogram analysis; [`bench`]
//! sweeps scenarios and page sizes into CSV records.

pub mod backend;
pub mod bench;
pub mod codec;
pub mod error;
pub mod model;
pub mod store;
pub mod testkit;
pub mod workload;

pub use error::{Error, Result};
