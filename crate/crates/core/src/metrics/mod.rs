//! Trajectory preprocessing and the three dissimilarity metrics: linear CKA,
//! orthogonal Procrustes, and DSA (delay embedding, linear dynamics fit, and
//! alignment over the orthogonal group).

mod align;
mod cka;
mod dsa;
mod preprocess;
mod procrustes;

pub use align::orthogonal_align;
pub use cka::cka_dissimilarity;
pub use dsa::{delay_embed, dsa_dissimilarity, embedded_rows, fit_linear_dynamics};
pub use preprocess::preprocess;
pub use procrustes::procrustes_dissimilarity;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::scalar::{real, Real};

/// Metric label carried by scores and report rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Cka,
    Procrustes,
    Dsa,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Cka, Metric::Procrustes, Metric::Dsa];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Cka => "cka",
            Metric::Procrustes => "procrustes",
            Metric::Dsa => "dsa",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cka" => Some(Metric::Cka),
            "procrustes" => Some(Metric::Procrustes),
            "dsa" => Some(Metric::Dsa),
            _ => None,
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A nonnegative dissimilarity. CKA and Procrustes values lie in [0, 1];
/// DSA values are unbounded above and carry the optimizer's convergence
/// flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore<S> {
    pub value: S,
    pub metric: Metric,
    pub converged: Option<bool>,
}

/// Preprocessing parameters: centering, Frobenius normalization, and PCA
/// reduction of the unit axis. `pca_components: None` keeps all units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessSpec {
    pub center: bool,
    pub normalize: bool,
    pub pca_components: Option<usize>,
}

impl Default for PreprocessSpec {
    /// The pipeline applied to recorded hidden states: center, normalize,
    /// keep the first twenty principal components.
    fn default() -> Self {
        Self {
            center: true,
            normalize: true,
            pca_components: Some(20),
        }
    }
}

impl PreprocessSpec {
    /// Center and normalize only; used for 3-dimensional attractor states.
    pub fn without_pca() -> Self {
        Self {
            center: true,
            normalize: true,
            pca_components: None,
        }
    }
}

/// DSA hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DsaConfig<S> {
    /// Number of delays in the embedding.
    pub n_delays: usize,
    /// Spacing between delays, in time steps.
    pub delay_interval: usize,
    /// Variance fraction retained when reducing the embedded space before
    /// the dynamics fit; `1.0` keeps every direction with nonzero variance.
    pub rank_tolerance: S,
    /// Optimizer restarts (seeded starting points on the orthogonal group).
    pub restarts: usize,
    /// Iteration cap per restart.
    pub max_iters: usize,
    /// Convergence threshold on the change of the alignment objective.
    pub step_tolerance: S,
    /// Seed for the restart starting points.
    pub seed: u64,
}

impl<S: Real> Default for DsaConfig<S> {
    fn default() -> Self {
        Self {
            n_delays: 33,
            delay_interval: 6,
            rank_tolerance: real(0.99),
            restarts: 10,
            max_iters: 2000,
            step_tolerance: real(1e-8),
            seed: 0,
        }
    }
}

impl<S: Real> DsaConfig<S> {
    pub fn validate(&self) -> crate::Result<()> {
        if self.n_delays < 1 || self.delay_interval < 1 {
            return Err(crate::Error::Config(
                "DSA needs n_delays >= 1 and delay_interval >= 1".into(),
            ));
        }
        if self.restarts < 1 {
            return Err(crate::Error::Config("DSA needs restarts >= 1".into()));
        }
        if self.rank_tolerance <= S::zero() || self.rank_tolerance > S::one() {
            return Err(crate::Error::Config(
                "DSA rank_tolerance must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Fitted linear transition operator of a delay-embedded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsMatrix<S> {
    /// The d x d least-squares transition matrix.
    pub matrix: DMatrix<S>,
    /// Embedded (possibly rank-reduced) dimension d.
    pub dim: usize,
    /// Frobenius norm of the residual divided by the norm of the targets.
    pub fit_residual: S,
}

// ---- shared matrix helpers ----

/// Subtracts each column's mean.
pub(crate) fn center_columns<S: Real>(m: &mut DMatrix<S>) {
    let rows = m.nrows();
    if rows == 0 {
        return;
    }
    let nf = crate::scalar::from_count::<S>(rows);
    for j in 0..m.ncols() {
        let mean = m.column(j).iter().copied().sum::<S>() / nf;
        for i in 0..rows {
            m[(i, j)] -= mean;
        }
    }
}

/// Frobenius norm.
pub(crate) fn fro_norm<S: Real>(m: &DMatrix<S>) -> S {
    m.iter().map(|&v| v * v).fold(S::zero(), |a, b| a + b).sqrt()
}

/// Squared Frobenius norm.
pub(crate) fn fro_norm_sq<S: Real>(m: &DMatrix<S>) -> S {
    m.iter().map(|&v| v * v).fold(S::zero(), |a, b| a + b)
}
