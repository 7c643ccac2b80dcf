//! Unit-volume rescaling and the "attractor + attractor + noise" models.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::AttractorSample;
use crate::error::{Error, Result};
use crate::scalar::{from_count, real, Real};
use crate::seed;
use crate::tensor::TrajectoryTensor;

/// Per-time-step Gaussian noise level, linearly interpolated from
/// `std_start` at the first step to `std_end` at the last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule<S> {
    pub std_start: S,
    pub std_end: S,
}

impl<S: Real> Default for NoiseSchedule<S> {
    fn default() -> Self {
        Self {
            std_start: real(0.01),
            std_end: real(0.0025),
        }
    }
}

impl<S: Real> NoiseSchedule<S> {
    /// Noise standard deviation at step `t` of a `steps`-long trial.
    pub fn std_at(&self, t: usize, steps: usize) -> S {
        if steps <= 1 {
            return self.std_start;
        }
        let frac = from_count::<S>(t) / from_count::<S>(steps - 1);
        self.std_start + (self.std_end - self.std_start) * frac
    }

    pub fn validate(&self) -> Result<()> {
        if self.std_end < S::zero() || self.std_start < self.std_end {
            return Err(Error::Config(
                "noise schedule needs std_start >= std_end >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Recipe for one composite model: `A + b_amplitude * B + noise`, rescaled
/// back to the unit ball.
#[derive(Debug, Clone)]
pub struct CompositeModelSpec<'a, S> {
    pub attractor_a: &'a AttractorSample<S>,
    pub attractor_b: Option<&'a AttractorSample<S>>,
    pub b_amplitude: S,
    pub noise_scale: S,
    pub noise_seed: u64,
}

/// Shifts states by the grand mean and divides by the maximum Euclidean
/// state norm, so every state lies in the unit ball. Idempotent.
pub fn rescale_tensor<S: Real>(t: &TrajectoryTensor<S>) -> Result<TrajectoryTensor<S>> {
    let (c, steps, n) = t.shape();
    let total = from_count::<S>(c * steps);
    let mut mean = vec![S::zero(); n];
    for ci in 0..c {
        for ti in 0..steps {
            for (m, &v) in mean.iter_mut().zip(t.state(ci, ti)) {
                *m += v;
            }
        }
    }
    for m in mean.iter_mut() {
        *m /= total;
    }
    let mut max_norm = S::zero();
    for ci in 0..c {
        for ti in 0..steps {
            let sq = t
                .state(ci, ti)
                .iter()
                .zip(&mean)
                .map(|(&v, &m)| (v - m) * (v - m))
                .fold(S::zero(), |a, b| a + b);
            max_norm = max_norm.max(sq.sqrt());
        }
    }
    if max_norm == S::zero() {
        return Err(Error::DegenerateInput(
            "rescale: all states identical".into(),
        ));
    }
    let mut data = Vec::with_capacity(c * steps * n);
    for ci in 0..c {
        for ti in 0..steps {
            for (ni, &v) in t.state(ci, ti).iter().enumerate() {
                data.push((v - mean[ni]) / max_norm);
            }
        }
    }
    TrajectoryTensor::new(data, c, steps, n, t.meta.clone())
}

/// [`rescale_tensor`] lifted to attractor samples.
pub fn rescale_unit_volume<S: Real>(s: &AttractorSample<S>) -> Result<AttractorSample<S>> {
    Ok(AttractorSample {
        trajectories: rescale_tensor(&s.trajectories)?,
        params: s.params,
        regime: s.regime,
        dt: s.dt,
    })
}

/// Builds `rescale(A + b_amplitude * B + noise)` where the noise standard
/// deviation follows `noise_scale * schedule` over trial time. Noise is
/// drawn independently per state dimension and per trial, from per-trial
/// streams derived from `noise_seed`.
pub fn compose_model<S: Real>(
    spec: &CompositeModelSpec<'_, S>,
    noise: &NoiseSchedule<S>,
) -> Result<TrajectoryTensor<S>> {
    noise.validate()?;
    let a = &spec.attractor_a.trajectories;
    let (c, steps, n) = a.shape();
    if let Some(b) = spec.attractor_b {
        let (cb, tb, nb) = b.trajectories.shape();
        if (cb, tb, nb) != (c, steps, n) {
            return Err(Error::Dimension(format!(
                "compose: A is ({c}, {steps}, {n}) but B is ({cb}, {tb}, {nb})"
            )));
        }
    } else if spec.b_amplitude != S::zero() {
        return Err(Error::Config(
            "compose: b_amplitude must be 0 without attractor B".into(),
        ));
    }
    let mut data = Vec::with_capacity(c * steps * n);
    for ci in 0..c {
        let mut rng = seed::rng(spec.noise_seed, &[ci as u64]);
        for ti in 0..steps {
            let std = spec.noise_scale * noise.std_at(ti, steps);
            for ni in 0..n {
                let mut v = a.get(ci, ti, ni);
                if let Some(b) = spec.attractor_b {
                    v += spec.b_amplitude * b.trajectories.get(ci, ti, ni);
                }
                let eps: f64 = rng.sample(StandardNormal);
                v += std * real::<S>(eps);
                data.push(v);
            }
        }
    }
    let mixed = TrajectoryTensor::new(data, c, steps, n, a.meta.clone())?;
    rescale_tensor(&mixed)
}
