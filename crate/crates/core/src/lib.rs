//! Run-history analytics kernel: data model, structure-graph merging,
//! search-space coverage, a small deterministic model zoo and explainers.
//!
//! `no_std` with `alloc`. File formats, the cache and the HTTP service live
//! in the `runlens` companion crate.

#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod math;
pub mod linalg;
pub mod assignment;
pub mod model;
pub mod structure;
pub mod coverage;
pub mod cpc;
pub mod ml;
pub mod explain;
pub mod ensemble;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
