//! File formats, ingestion, parallel training and the command line for
//! `srcloc-core`.

pub mod annotations;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod manifest;
pub mod report;
pub mod wav;

pub use error::{Error, Result};
