//! Synthetic-data synthesis engine for task streams.
//!
//! A synthesis policy is trained over an ordered stream of tasks. For each
//! task the engine builds a diverse prompt pool from slot-filled templates,
//! generates candidate samples through pluggable backends, scores each
//! candidate with a dual-level reward (sample quality plus set-level
//! distinctiveness), and applies group-relative policy-gradient updates.
//! Policy state and a pool of embedded candidates carry forward from task
//! to task, and checkpoints make every run resumable and reproducible.
//!
//! Modules map onto the pipeline stages:
//!
//! - [`scalar`]: numeric kernel, generic over the float type
//! - [`model`]: shared domain types, ids, validation, serialization
//! - [`prompt`]: slot-template prompt pools with depth/breadth evolution
//! - [`scoring`]: sample-level and set-level reward computation
//! - [`backend`]: generation/embedding/classification providers (HTTP + mocks)
//! - [`optimizer`]: supervised warm-start and group-relative RL per task
//! - [`orchestrator`]: the stream loop, candidate pool, checkpointing
//! - [`eval`]: toy task families, forward transfer, transfer matrices
//! - [`config`]: run configuration parsing and normalization

pub mod backend;
pub mod config;
pub mod eval;
pub mod jsonl;
pub mod model;
pub mod optimizer;
pub mod orchestrator;
pub mod prompt;
pub mod scalar;
pub mod scoring;

/// Concrete scalar used by all domain types and serialized records.
///
/// The numeric kernel in [`scalar`] is generic over the float type; the
/// rest of the engine instantiates it at `f64` through this alias.
pub type Real = f64;
