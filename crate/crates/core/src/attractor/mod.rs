//! Lorenz-system simulation, regime classification, unit-volume rescaling,
//! scheduled Gaussian noise, and compositional model construction.

mod compose;
mod lorenz;

pub use compose::{compose_model, rescale_tensor, rescale_unit_volume, CompositeModelSpec, NoiseSchedule};
pub use lorenz::{classify_regime, integrate, lorenz_deriv, rk4_step, simulate_lorenz};

use serde::{Deserialize, Serialize};

use crate::scalar::{real, Real};
use crate::tensor::TrajectoryTensor;

/// Lorenz parameters. The benchmark varies rho and keeps the paper's
/// sigma = 10 and beta = 2.667.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorenzParams<S> {
    pub sigma: S,
    pub rho: S,
    pub beta: S,
}

impl<S: Real> LorenzParams<S> {
    /// Default sigma and beta with the given rho.
    pub fn with_rho(rho: S) -> Self {
        Self {
            sigma: real(10.0),
            rho,
            beta: real(2.667),
        }
    }
}

/// Fixed-point structure of the Lorenz system at given parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    OneStable,
    TwoStable,
    TwoUnstable,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::OneStable => "one_stable",
            Regime::TwoStable => "two_stable",
            Regime::TwoUnstable => "two_unstable",
        };
        f.write_str(s)
    }
}

/// A simulated attractor section: C trials of T steps of the 3-dimensional
/// state.
#[derive(Debug, Clone)]
pub struct AttractorSample<S> {
    pub trajectories: TrajectoryTensor<S>,
    pub params: LorenzParams<S>,
    pub regime: Regime,
    pub dt: S,
}
