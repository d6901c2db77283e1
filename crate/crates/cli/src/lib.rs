//! File formats, checkpoints, configuration and experiment stages for the
//! `union` command-line tool.

pub mod checkpoint;
pub mod config;
pub mod formats;
pub mod ingest;
pub mod pipeline;
