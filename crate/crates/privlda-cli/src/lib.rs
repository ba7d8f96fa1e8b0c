//! Batch experiment front end: ingest corpora, train under the available
//! privacy mechanisms, evaluate perplexity, sweep privacy levels, and probe
//! the per-sampling bound against its exhaustive oracle.

pub mod commands;
pub mod config;
