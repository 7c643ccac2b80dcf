//! Classical RK4 integration of the Lorenz system and fixed-point analysis.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use super::{AttractorSample, LorenzParams, Regime};
use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::seed;
use crate::tensor::{TensorMeta, TrajectoryTensor};

/// Steps integrated and discarded before recording, so trajectories start on
/// (or near) the attractor.
pub const BURN_IN_STEPS: usize = 1000;

/// Lorenz vector field.
#[inline]
pub fn lorenz_deriv<S: Real>(p: &LorenzParams<S>, s: &Vector3<S>) -> Vector3<S> {
    Vector3::new(
        p.sigma * (s.y - s.x),
        s.x * (p.rho - s.z) - s.y,
        s.x * s.y - p.beta * s.z,
    )
}

/// One classical 4th-order Runge–Kutta step.
#[inline]
pub fn rk4_step<S: Real>(p: &LorenzParams<S>, s: &Vector3<S>, dt: S) -> Vector3<S> {
    let half = real::<S>(0.5);
    let sixth = S::one() / real::<S>(6.0);
    let two = real::<S>(2.0);
    let k1 = lorenz_deriv(p, s);
    let k2 = lorenz_deriv(p, &(s + k1 * (dt * half)));
    let k3 = lorenz_deriv(p, &(s + k2 * (dt * half)));
    let k4 = lorenz_deriv(p, &(s + k3 * dt));
    s + (k1 + k2 * two + k3 * two + k4) * (dt * sixth)
}

/// Integrates from `ic`, returning `steps` states starting at `ic` itself.
/// Fails with a divergence error if any state goes non-finite.
pub fn integrate<S: Real>(
    p: &LorenzParams<S>,
    ic: Vector3<S>,
    steps: usize,
    dt: S,
) -> Result<Vec<Vector3<S>>> {
    let mut out = Vec::with_capacity(steps);
    let mut s = ic;
    for i in 0..steps {
        if !(s.x.is_finite() && s.y.is_finite() && s.z.is_finite()) {
            return Err(Error::Divergence { trial: 0, step: i });
        }
        out.push(s);
        s = rk4_step(p, &s, dt);
    }
    Ok(out)
}

/// Simulates `trials` seeded trajectories of `steps` recorded states each.
///
/// Each trial starts from a random initial condition near the attractor
/// region, runs a discarded burn-in of [`BURN_IN_STEPS`] steps, then records.
/// Trials use seeds derived from their index, so any parallel execution
/// order produces identical output.
pub fn simulate_lorenz<S: Real>(
    p: &LorenzParams<S>,
    trials: usize,
    steps: usize,
    dt: S,
    seed: u64,
) -> Result<AttractorSample<S>> {
    if trials < 1 || steps < 2 {
        return Err(Error::Config(format!(
            "simulate_lorenz needs trials >= 1 and T >= 2, got ({trials}, {steps})"
        )));
    }
    if dt <= S::zero() {
        return Err(Error::Config("simulate_lorenz needs dt > 0".into()));
    }
    let mut data = Vec::with_capacity(trials * steps * 3);
    for trial in 0..trials {
        let mut rng = seed::rng(seed, &[trial as u64]);
        let spread = 5.0;
        let z_off = real::<S>(rng.random_range(-spread..spread));
        let mut s = Vector3::new(
            real::<S>(rng.random_range(-spread..spread)),
            real::<S>(rng.random_range(-spread..spread)),
            (p.rho - S::one()).max(S::zero()) + z_off,
        );
        for step in 0..BURN_IN_STEPS + steps {
            if !(s.x.is_finite() && s.y.is_finite() && s.z.is_finite()) {
                return Err(Error::Divergence { trial, step });
            }
            if step >= BURN_IN_STEPS {
                data.extend_from_slice(&[s.x, s.y, s.z]);
            }
            s = rk4_step(p, &s, dt);
        }
    }
    let meta = TensorMeta {
        source: format!("lorenz(rho={})", s_to_string(p.rho)),
        seed,
    };
    Ok(AttractorSample {
        trajectories: TrajectoryTensor::new(data, trials, steps, 3, meta)?,
        params: *p,
        regime: classify_regime(p),
        dt,
    })
}

fn s_to_string<S: Real>(s: S) -> String {
    format!("{}", crate::scalar::to_f64(s))
}

/// Classifies the fixed-point structure: `OneStable` for rho < 1, otherwise
/// the Jacobian eigenvalues at the nonzero fixed points decide between
/// `TwoStable` (all real parts negative) and `TwoUnstable`.
pub fn classify_regime<S: Real>(p: &LorenzParams<S>) -> Regime {
    if p.rho < S::one() {
        return Regime::OneStable;
    }
    // nonzero fixed points: (±sqrt(beta(rho-1)), ±sqrt(beta(rho-1)), rho-1);
    // both share the same spectrum, so one suffices
    let r = (p.beta * (p.rho - S::one())).sqrt();
    let z = p.rho - S::one();
    let jac = Matrix3::new(
        -p.sigma, p.sigma, S::zero(),
        p.rho - z, -S::one(), -r,
        r, r, -p.beta,
    );
    let eig = jac.complex_eigenvalues();
    let all_negative = eig.iter().all(|l| l.re < S::zero());
    if all_negative {
        Regime::TwoStable
    } else {
        Regime::TwoUnstable
    }
}
