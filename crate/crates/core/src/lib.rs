//! Counting benchmark and attention-intervention toolkit for vision-language models.
//!
//! The crate is split along the pipeline:
//!
//! - [`scene`]: deterministic synthetic counting scenes, ground-truth manifests and datasets.
//! - [`prompt`]: prompt ladders built by attribute substitution.
//! - [`metrics`]: answer parsing, accuracy, mean relative count error and bucketed reports.
//! - [`intervention`]: attention reweighting operators, layer schedules, GQA head expansion
//!   and the attention capture container.
//! - [`relevance`]: gradient-weighted layer-wise relevance propagation and localization IoU.
//! - [`harness`]: backends (including deterministic mocks), experiment runs and report emission.

pub mod harness;
pub mod intervention;
pub mod mask;
pub mod metrics;
pub mod prompt;
pub mod relevance;
pub mod rng;
pub mod scene;

pub use mask::BinaryMask;
