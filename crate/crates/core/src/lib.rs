//! Core engine for an EEG music-listening lifelog.

pub mod analytics;
pub mod classifier;
pub mod datamodel;
pub mod dsp;
pub mod error;
pub mod featsel;
pub mod ingest;
pub mod recommend;
pub mod store;
pub mod synthgen;

pub use error::{Error, ErrorCode, Result};
