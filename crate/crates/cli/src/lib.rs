//! Run pipeline for the parametric reduced-order-modeling toolkit. A single
//! JSON configuration drives five stages — generate, train, predict,
//! evaluate, compare — and every artifact carries the SHA-256 hash of that
//! configuration, so mixed or stale runs are rejected instead of silently
//! blended. All outputs are deterministic: a rerun with the same
//! configuration and seed reproduces identical bytes.

pub mod artifacts;
pub mod config;
pub mod pipeline;
