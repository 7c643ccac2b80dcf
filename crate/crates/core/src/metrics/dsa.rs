//! Delay embedding and the least-squares linear dynamics fit behind DSA.

use nalgebra::DMatrix;

use super::{preprocess::principal_axes_with_tolerance, DsaConfig, DynamicsMatrix, SimilarityScore};
use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::tensor::TrajectoryTensor;

/// Builds the delay-embedded one-step pairs of a trajectory tensor.
///
/// For each condition, the row at time `t` is the concatenation
/// `[x_t, x_{t+tau}, ..., x_{t+(d-1)tau}]` with `d = n_delays` and
/// `tau = delay_interval`; the valid range gives `T - (d-1)*tau` embedded
/// rows per condition. `H_prev` and `H_next` are the one-step-shifted row
/// pairs stacked over conditions, each with `d * N` columns.
pub fn delay_embed<S: Real>(
    x: &TrajectoryTensor<S>,
    cfg: &DsaConfig<S>,
) -> Result<(DMatrix<S>, DMatrix<S>)> {
    cfg.validate()?;
    let (c, t, n) = x.shape();
    let d = cfg.n_delays;
    let tau = cfg.delay_interval;
    let span = (d - 1) * tau;
    // need at least two embedded rows to form one (prev, next) pair
    if span + 1 >= t {
        return Err(Error::Embedding {
            min_t: span + 2,
            t,
        });
    }
    let rows_per_cond = t - span;
    let pairs_per_cond = rows_per_cond - 1;
    let cols = d * n;
    let total = c * pairs_per_cond;
    let mut h_prev = DMatrix::zeros(total, cols);
    let mut h_next = DMatrix::zeros(total, cols);
    for ci in 0..c {
        for p in 0..pairs_per_cond {
            let row = ci * pairs_per_cond + p;
            for k in 0..d {
                let prev_state = x.state(ci, p + k * tau);
                let next_state = x.state(ci, p + 1 + k * tau);
                for ni in 0..n {
                    h_prev[(row, k * n + ni)] = prev_state[ni];
                    h_next[(row, k * n + ni)] = next_state[ni];
                }
            }
        }
    }
    Ok((h_prev, h_next))
}

/// Number of embedded rows per condition for a valid `(T, d, tau)`.
pub fn embedded_rows(t: usize, n_delays: usize, delay_interval: usize) -> usize {
    t - (n_delays - 1) * delay_interval
}

/// Fits the least-squares linear transition operator `A` minimizing
/// `|H_next - H_prev * A|_F` after reducing the embedded space to its
/// leading principal subspace (retaining `rank_tolerance` of the variance).
/// `rank_tolerance = 1.0` skips the reduction and fits in the raw embedded
/// coordinates; rank deficiency is then handled by the pseudoinverse alone.
pub fn fit_linear_dynamics<S: Real>(
    h_prev: &DMatrix<S>,
    h_next: &DMatrix<S>,
    cfg: &DsaConfig<S>,
) -> Result<DynamicsMatrix<S>> {
    if h_prev.shape() != h_next.shape() {
        return Err(Error::Dimension(format!(
            "fit: {:?} vs {:?}",
            h_prev.shape(),
            h_next.shape()
        )));
    }
    if h_prev.nrows() == 0 {
        return Err(Error::DegenerateInput("fit: no rows".into()));
    }
    let zero_prev = h_prev.iter().all(|v| *v == S::zero());
    let zero_next = h_next.iter().all(|v| *v == S::zero());
    if zero_prev && zero_next {
        return Err(Error::DegenerateInput("fit: all-zero inputs".into()));
    }
    let (p, q, dim) = if cfg.rank_tolerance >= S::one() {
        (h_prev.clone(), h_next.clone(), h_prev.ncols())
    } else {
        // principal subspace of the stacked embedding
        let gram = h_prev.transpose() * h_prev + h_next.transpose() * h_next;
        let basis = principal_axes_with_tolerance(&gram, cfg.rank_tolerance)?;
        let dim = basis.ncols();
        (h_prev * &basis, h_next * &basis, dim)
    };
    // rank-revealing least squares through the SVD of the reduced predictor
    let svd = p.clone().svd(true, true);
    let smax = svd
        .singular_values
        .iter()
        .fold(S::zero(), |a, &b| a.max(b));
    let eps = smax * real::<S>(1e-12);
    let a = svd
        .solve(&q, eps)
        .map_err(|e| Error::Numeric(format!("fit: svd solve failed: {e}")))?;
    let q_norm = super::fro_norm(&q);
    let fit_residual = if q_norm == S::zero() {
        S::zero()
    } else {
        super::fro_norm(&(&q - &p * &a)) / q_norm
    };
    Ok(DynamicsMatrix {
        matrix: a,
        dim,
        fit_residual,
    })
}

/// DSA dissimilarity: delay embedding, dynamics fit, and orthogonal
/// alignment on both inputs. The inputs must have been preprocessed
/// identically.
pub fn dsa_dissimilarity<S: Real>(
    x: &TrajectoryTensor<S>,
    y: &TrajectoryTensor<S>,
    cfg: &DsaConfig<S>,
) -> Result<SimilarityScore<S>> {
    let (xp, xn) = delay_embed(x, cfg)?;
    let ax = fit_linear_dynamics(&xp, &xn, cfg)?;
    let (yp, yn) = delay_embed(y, cfg)?;
    let ay = fit_linear_dynamics(&yp, &yn, cfg)?;
    super::orthogonal_align(&ax, &ay, cfg)
}
