//! Core library for comparing dynamical representations.
//!
//! The crate provides three dissimilarity metrics over trajectory tensors
//! (linear CKA, orthogonal Procrustes, and DSA — a delay-embedded linear
//! dynamics comparison aligned over the orthogonal group), the simulation
//! machinery the benchmark protocols are built from (Lorenz attractors,
//! composite noisy models, cognitive-task trial generators, leaky recurrent
//! networks trained with BPTT), and the supporting statistics (OLS with slope
//! inference, Welch's t-test, Benjamini–Hochberg FDR, bootstrap errors).
//!
//! All numeric code is generic over the scalar type through [`scalar::Real`];
//! concrete `f64` aliases for the main domain types live at the crate root.

pub mod attractor;
pub mod cogtasks;
pub mod container;
pub mod error;
pub mod metrics;
pub mod rnn;
pub mod scalar;
pub mod seed;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Real;

/// Trajectory tensor over `f64`, the default precision of the benchmarks.
pub type Trajectory = tensor::TrajectoryTensor<f64>;
/// Trajectory tensor over `f32`.
pub type Trajectory32 = tensor::TrajectoryTensor<f32>;
/// Fitted linear transition operator over `f64`.
pub type Dynamics = metrics::DynamicsMatrix<f64>;
/// Dissimilarity score over `f64`.
pub type Score = metrics::SimilarityScore<f64>;
