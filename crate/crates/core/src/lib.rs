//! Multi-task commonsense explanation generation.
//!
//! A small decoder-only transformer with a shared trunk, a language-model
//! head shared between fact pretraining and keyword-conditioned explanation
//! generation, and a merged 12-way classification head whose output is
//! masked to the label slice of the dataset named by the contextual keyword.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, dataset loaders
//! and the command line live in the `union-cli` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod corpus;
pub mod decode;
mod error;
pub mod metrics;
pub mod model;
pub mod text;
pub mod tokenizer;

pub use error::{Error, Result};

/// Stable 64-bit FNV-1a hash of a byte string.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    use core::hash::Hasher;
    let mut h = fnv::FnvHasher::default();
    h.write(bytes);
    h.finish()
}
