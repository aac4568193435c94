//! IO, formats, analysis engine, HTTP service and CLI on top of `runlens-core`.

pub mod cache;
pub mod cli;
pub mod dataset;
pub mod dot;
pub mod engine;
pub mod export;
pub mod service;
pub mod simulate;
pub mod error;
pub mod interchange;

pub use error::{Error, Result};
