//! Linear centered kernel alignment, reported as a dissimilarity.

use super::{center_columns, fro_norm, fro_norm_sq, Metric, SimilarityScore};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::TrajectoryTensor;

/// `1 - |X'Y|_F^2 / (|X'X|_F * |Y'Y|_F)` over the centered, flattened
/// sample matrices. The two tensors must share (C, T); the unit counts may
/// differ.
pub fn cka_dissimilarity<S: Real>(
    x: &TrajectoryTensor<S>,
    y: &TrajectoryTensor<S>,
) -> Result<SimilarityScore<S>> {
    let (cx, tx, _) = x.shape();
    let (cy, ty, _) = y.shape();
    if (cx, tx) != (cy, ty) {
        return Err(Error::Dimension(format!(
            "cka: sample axes differ: ({cx}, {tx}) vs ({cy}, {ty})"
        )));
    }
    let mut xm = x.samples_matrix();
    let mut ym = y.samples_matrix();
    center_columns(&mut xm);
    center_columns(&mut ym);
    let cross = fro_norm_sq(&(xm.transpose() * &ym));
    let nx = fro_norm(&(xm.transpose() * &xm));
    let ny = fro_norm(&(ym.transpose() * &ym));
    if nx == S::zero() || ny == S::zero() {
        return Err(Error::DegenerateInput(
            "cka: zero-variance input".into(),
        ));
    }
    let value = (S::one() - cross / (nx * ny)).clamp(S::zero(), S::one());
    Ok(SimilarityScore {
        value,
        metric: Metric::Cka,
        converged: None,
    })
}
