//! Centering, PCA reduction of the unit axis, and Frobenius normalization.

use nalgebra::DMatrix;

use super::{center_columns, PreprocessSpec};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::TrajectoryTensor;

/// Applies centering, PCA reduction, and normalization, in that order.
///
/// PCA treats the flattened `(C*T) x N` matrix as samples-by-units; the
/// retained components are the leading eigenvectors of the sample Gram
/// matrix. After reduction every retained component has zero mean over all
/// `(c, t)` samples (when centering is on), and when `normalize` is set the
/// flattened output has unit Frobenius norm.
pub fn preprocess<S: Real>(
    x: &TrajectoryTensor<S>,
    spec: &PreprocessSpec,
) -> Result<TrajectoryTensor<S>> {
    let (c, t, n) = x.shape();
    let mut m = x.samples_matrix();
    if spec.center {
        center_columns(&mut m);
    }
    if let Some(k) = spec.pca_components {
        if k == 0 {
            return Err(Error::Config("pca_components must be >= 1".into()));
        }
        if k > n || k > c * t {
            return Err(Error::Dimension(format!(
                "pca_components = {k} exceeds available rank (N = {n}, samples = {})",
                c * t
            )));
        }
        let basis = principal_axes(&m, k);
        m *= basis; // scores: (C*T) x k
    }
    if spec.normalize {
        let norm = super::fro_norm(&m);
        if norm == S::zero() {
            return Err(Error::DegenerateInput(
                "preprocess: zero-variance tensor cannot be normalized".into(),
            ));
        }
        m /= norm;
    }
    TrajectoryTensor::from_samples_matrix(&m, c, t, x.meta.clone())
}

/// Eigenvalues (descending) and matching sign-canonical eigenvectors of a
/// symmetric PSD matrix. Each eigenvector has its largest-magnitude
/// coefficient made positive.
fn sorted_eigen<S: Real>(gram: &DMatrix<S>) -> (Vec<S>, DMatrix<S>) {
    let eig = gram.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap()
    });
    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (out_col, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let mut lead = S::zero();
        for &v in col.iter() {
            if v.abs() > lead.abs() {
                lead = v;
            }
        }
        let sign = if lead < S::zero() { -S::one() } else { S::one() };
        for i in 0..n {
            vectors[(i, out_col)] = col[i] * sign;
        }
    }
    (values, vectors)
}

/// Leading `k` principal axes (columns) of the samples-by-features matrix,
/// from the eigendecomposition of the feature Gram matrix.
pub(crate) fn principal_axes<S: Real>(m: &DMatrix<S>, k: usize) -> DMatrix<S> {
    let gram = m.transpose() * m;
    let (_, vectors) = sorted_eigen(&gram);
    vectors.columns(0, k).into_owned()
}

/// Smallest leading eigenbasis of a PSD Gram matrix whose eigenvalues sum
/// to at least `tolerance` of the total variance. Directions below the
/// numerical noise floor are never retained.
pub(crate) fn principal_axes_with_tolerance<S: Real>(
    gram: &DMatrix<S>,
    tolerance: S,
) -> crate::Result<DMatrix<S>> {
    let (values, vectors) = sorted_eigen(gram);
    let total: S = values.iter().map(|&v| v.max(S::zero())).sum();
    if total <= S::zero() {
        return Err(crate::Error::DegenerateInput(
            "principal axes of a zero Gram matrix".into(),
        ));
    }
    let floor = values[0] * S::from_f64(1e-12).unwrap();
    let mut k = 0;
    let mut acc = S::zero();
    for &v in &values {
        if k > 0 && (v <= floor || acc >= tolerance * total) {
            break;
        }
        acc += v.max(S::zero());
        k += 1;
    }
    // never split a (near-)degenerate eigenvalue cluster: the subspace of a
    // partial cluster is not well-defined, which would break orthogonal
    // invariance downstream
    let cluster = S::from_f64(1e-6).unwrap();
    while k < values.len() && values[k] > floor && values[k] >= values[k - 1] * (S::one() - cluster)
    {
        k += 1;
    }
    Ok(vectors.columns(0, k).into_owned())
}
