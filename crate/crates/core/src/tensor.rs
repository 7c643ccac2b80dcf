//! Trajectory tensors: activations indexed by (condition, time, unit).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Real};

/// Provenance carried alongside a trajectory tensor.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorMeta {
    pub source: String,
    pub seed: u64,
}

/// Activations indexed `(condition c, time t, unit n)`, stored row-major in
/// `(c, t, n)` order. The universal input to all metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTensor<S> {
    data: Vec<S>,
    conditions: usize,
    steps: usize,
    units: usize,
    pub meta: TensorMeta,
}

impl<S: Real> TrajectoryTensor<S> {
    /// Builds a tensor from flat `(c, t, n)` row-major data, validating the
    /// shape invariants (C >= 1, T >= 2, N >= 1, all entries finite).
    pub fn new(
        data: Vec<S>,
        conditions: usize,
        steps: usize,
        units: usize,
        meta: TensorMeta,
    ) -> Result<Self> {
        if conditions < 1 || steps < 2 || units < 1 {
            return Err(Error::Dimension(format!(
                "trajectory tensor needs C >= 1, T >= 2, N >= 1, got ({conditions}, {steps}, {units})"
            )));
        }
        if data.len() != conditions * steps * units {
            return Err(Error::Dimension(format!(
                "data length {} does not match shape ({conditions}, {steps}, {units})",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "trajectory tensor contains non-finite entries".into(),
            ));
        }
        Ok(Self {
            data,
            conditions,
            steps,
            units,
            meta,
        })
    }

    /// Builds a tensor by evaluating `f(c, t, n)`.
    pub fn from_fn(
        conditions: usize,
        steps: usize,
        units: usize,
        meta: TensorMeta,
        mut f: impl FnMut(usize, usize, usize) -> S,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(conditions * steps * units);
        for c in 0..conditions {
            for t in 0..steps {
                for n in 0..units {
                    data.push(f(c, t, n));
                }
            }
        }
        Self::new(data, conditions, steps, units, meta)
    }

    pub fn conditions(&self) -> usize {
        self.conditions
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn units(&self) -> usize {
        self.units
    }

    /// `(C, T, N)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.conditions, self.steps, self.units)
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize, n: usize) -> S {
        self.data[(c * self.steps + t) * self.units + n]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    /// State vector at `(c, t)` as a slice of length N.
    #[inline]
    pub fn state(&self, c: usize, t: usize) -> &[S] {
        let off = (c * self.steps + t) * self.units;
        &self.data[off..off + self.units]
    }

    /// Flattens conditions along the sample axis: a `(C*T) x N` matrix whose
    /// row `c*T + t` is the state at `(c, t)`.
    pub fn samples_matrix(&self) -> DMatrix<S> {
        let rows = self.conditions * self.steps;
        DMatrix::from_fn(rows, self.units, |r, n| self.data[r * self.units + n])
    }

    /// Inverse of [`samples_matrix`](Self::samples_matrix) for a known (C, T).
    pub fn from_samples_matrix(
        m: &DMatrix<S>,
        conditions: usize,
        steps: usize,
        meta: TensorMeta,
    ) -> Result<Self> {
        if m.nrows() != conditions * steps {
            return Err(Error::Dimension(format!(
                "matrix has {} rows, expected C*T = {}",
                m.nrows(),
                conditions * steps
            )));
        }
        let units = m.ncols();
        let mut data = Vec::with_capacity(m.nrows() * units);
        for r in 0..m.nrows() {
            for n in 0..units {
                data.push(m[(r, n)]);
            }
        }
        Self::new(data, conditions, steps, units, meta)
    }

    /// Converts the scalar type (used when persisting as 64-bit floats).
    pub fn cast<T: Real>(&self) -> TrajectoryTensor<T> {
        TrajectoryTensor {
            data: self
                .data
                .iter()
                .map(|&v| T::from_f64(to_f64(v)).expect("finite cast"))
                .collect(),
            conditions: self.conditions,
            steps: self.steps,
            units: self.units,
            meta: self.meta.clone(),
        }
    }

    /// Frobenius norm of the flattened tensor.
    pub fn frobenius_norm(&self) -> S {
        self.data
            .iter()
            .map(|&v| v * v)
            .fold(S::zero(), |a, b| a + b)
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> TensorMeta {
        TensorMeta {
            source: "test".into(),
            seed: 0,
        }
    }

    #[test]
    fn shape_invariants_are_enforced() {
        assert!(TrajectoryTensor::<f64>::new(vec![], 0, 2, 1, meta()).is_err());
        assert!(TrajectoryTensor::<f64>::new(vec![0.0; 2], 1, 1, 2, meta()).is_err());
        assert!(TrajectoryTensor::<f64>::new(vec![0.0; 3], 1, 2, 1, meta()).is_err());
        assert!(TrajectoryTensor::new(vec![0.0, f64::NAN], 1, 2, 1, meta()).is_err());
        assert!(TrajectoryTensor::new(vec![0.0, 1.0], 1, 2, 1, meta()).is_ok());
    }

    #[test]
    fn samples_matrix_round_trips() {
        let t =
            TrajectoryTensor::from_fn(2, 3, 2, meta(), |c, t, n| (100 * c + 10 * t + n) as f64)
                .unwrap();
        let m = t.samples_matrix();
        assert_eq!(m.nrows(), 6);
        assert_eq!(m[(0, 1)], 1.0);
        assert_eq!(m[(3, 0)], 100.0); // c=1, t=0, n=0
        let back = TrajectoryTensor::from_samples_matrix(&m, 2, 3, meta()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn indexing_matches_layout() {
        let t =
            TrajectoryTensor::from_fn(2, 4, 3, meta(), |c, t, n| (c * 12 + t * 3 + n) as f64)
                .unwrap();
        assert_eq!(t.get(1, 2, 2), (12 + 6 + 2) as f64);
        assert_eq!(t.state(1, 2), &[18.0, 19.0, 20.0]);
    }
}
