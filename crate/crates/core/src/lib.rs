//! Cross-modal face/voice co-embedding laboratory.
//!
//! Two projection heads map pooled face and voice backbone features into a
//! shared embedding space, trained with a softmax-over-distances triplet
//! objective (or a contrastive / binary-classifier alternative). The crate
//! also carries the evaluation protocols used on such models: two-way
//! forced matching under demographic grouping, cross-modal recall@K,
//! linear attribute probes, and the statistics behind a human 2AFC study.

pub mod config;
pub mod datamodel;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod numerics;
pub mod probes;
pub mod stats;
pub mod trainer;

pub use error::{Error, Result};
