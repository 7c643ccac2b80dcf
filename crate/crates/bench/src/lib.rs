//! Benchmark protocols for the dynamical representation-similarity metrics.
//!
//! Two test beds: composed noisy Lorenz attractors (noise robustness,
//! compositional combination, motif discrimination, and the DSA parameter
//! search), and compositional learning in small recurrent networks (the
//! schedule battery with its comparison analyses).

pub mod attractor;
pub mod report;
pub mod scale;
pub mod schedule;
pub mod search;
pub mod series;

pub use dynabench_core::{Error, Result};
