//! Alignment of two linear transition operators over the orthogonal group:
//! first-order descent with a Cayley-style retraction, Barzilai–Borwein
//! steps, and Armijo backtracking, restarted from seeded starting points in
//! both components of O(d).

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{fro_norm, fro_norm_sq, DsaConfig, DynamicsMatrix, Metric, SimilarityScore};
use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::seed;

/// Minimizes `|C A1 C' - A2|_F / sqrt(|A1|_F |A2|_F)` over orthogonal `C`.
///
/// Matrices of unequal dimension are zero-padded to the larger one. The two
/// arguments are ordered canonically before optimizing, so the score is
/// exactly symmetric; the conjugation objective itself has equal optima in
/// both directions.
pub fn orthogonal_align<S: Real>(
    a1: &DynamicsMatrix<S>,
    a2: &DynamicsMatrix<S>,
    cfg: &DsaConfig<S>,
) -> Result<SimilarityScore<S>> {
    cfg.validate()?;
    if a1.matrix.iter().any(|v| !v.is_finite()) || a2.matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("align: non-finite entries".into()));
    }
    let d = a1.dim.max(a2.dim);
    if d == 0 {
        return Err(Error::DegenerateInput("align: empty operators".into()));
    }
    let a = pad(&a1.matrix, d);
    let b = pad(&a2.matrix, d);
    let na = fro_norm(&a);
    let nb = fro_norm(&b);
    if na == S::zero() || nb == S::zero() {
        return Err(Error::DegenerateInput("align: zero operator".into()));
    }
    let denom = (na * nb).sqrt();
    let (first, second) = if lex_le(&a, &b) { (&a, &b) } else { (&b, &a) };

    let mut best_f = S::max_value().unwrap();
    let mut best_converged = false;
    for r in 0..cfg.restarts {
        let c0 = start_point::<S>(d, r, cfg.seed);
        let (f, converged) = minimize(first, second, c0, cfg);
        if f < best_f {
            best_f = f;
            best_converged = converged;
        }
    }
    Ok(SimilarityScore {
        value: best_f.max(S::zero()).sqrt() / denom,
        metric: Metric::Dsa,
        converged: Some(best_converged),
    })
}

fn pad<S: Real>(m: &DMatrix<S>, d: usize) -> DMatrix<S> {
    if m.nrows() == d {
        return m.clone();
    }
    let mut out = DMatrix::zeros(d, d);
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

/// Column-major lexicographic order; ties mean the matrices are equal.
fn lex_le<S: Real>(a: &DMatrix<S>, b: &DMatrix<S>) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    true
}

/// Restart starting points: identity, one reflection, then Haar-random
/// matrices alternating between the rotation and reflection components.
fn start_point<S: Real>(d: usize, restart: usize, seed: u64) -> DMatrix<S> {
    match restart {
        0 => DMatrix::identity(d, d),
        1 => {
            let mut m = DMatrix::identity(d, d);
            m[(0, 0)] = -S::one();
            m
        }
        r => {
            let mut rng = seed::rng(seed, &[0x616c_6967, r as u64]);
            let g = DMatrix::from_fn(d, d, |_, _| real::<S>(rng.sample::<f64, _>(StandardNormal)));
            let qr = g.qr();
            let mut q = qr.q();
            let rmat = qr.r();
            for j in 0..d {
                if rmat[(j, j)] < S::zero() {
                    for i in 0..d {
                        q[(i, j)] = -q[(i, j)];
                    }
                }
            }
            let want_reflection = r % 2 == 1;
            let is_reflection = q.determinant() < S::zero();
            if want_reflection != is_reflection {
                for i in 0..d {
                    q[(i, 0)] = -q[(i, 0)];
                }
            }
            q
        }
    }
}

fn objective<S: Real>(a: &DMatrix<S>, b: &DMatrix<S>, c: &DMatrix<S>) -> S {
    let ca = c * a;
    let e = &ca * c.transpose() - b;
    fro_norm_sq(&e)
}


/// One restart of Cayley descent. Returns the final objective value and
/// whether the objective change dropped below `step_tolerance` in time.
fn minimize<S: Real>(
    a: &DMatrix<S>,
    b: &DMatrix<S>,
    mut c: DMatrix<S>,
    cfg: &DsaConfig<S>,
) -> (S, bool) {
    let d = a.nrows();
    let eye = DMatrix::<S>::identity(d, d);
    let half = real::<S>(0.5);
    let armijo = real::<S>(1e-4);
    let mut f = objective(a, b, &c);
    let mut prev: Option<(DMatrix<S>, DMatrix<S>)> = None;
    let mut tau = S::zero();
    let grad_floor = real::<S>(1e-24) * (S::one() + f);

    for iter in 0..cfg.max_iters {
        let ca = &c * a;
        let e = &ca * c.transpose() - b;
        let cat = &c * a.transpose();
        let g = (&e * &cat + e.transpose() * &ca) * real::<S>(2.0);
        let w = &g * c.transpose() - &c * g.transpose();
        let wn2 = fro_norm_sq(&w);
        if wn2 <= grad_floor {
            // stationary point
            return (f, true);
        }

        tau = match &prev {
            None => S::one() / (wn2.sqrt() + S::one()),
            Some((pc, pw)) => {
                let s = &c - pc;
                let y = &w - pw;
                let ss = fro_norm_sq(&s);
                let yy = fro_norm_sq(&y);
                let sy = s.iter().zip(y.iter()).map(|(&u, &v)| u * v).sum::<S>();
                let bb = if iter % 2 == 0 {
                    if sy.abs() > S::zero() { ss / sy.abs() } else { tau }
                } else if yy > S::zero() {
                    sy.abs() / yy
                } else {
                    tau
                };
                bb.clamp(real::<S>(1e-12), real::<S>(1e6))
            }
        };
        prev = Some((c.clone(), w.clone()));

        // Armijo backtracking along the Cayley curve; its directional
        // derivative at tau = 0 is -|W|^2 / 2
        let mut accepted = false;
        let mut f_new = f;
        let mut c_new = c.clone();
        for _ in 0..40 {
            let m1 = &eye + &w * (tau * half);
            let m2 = (&eye - &w * (tau * half)) * &c;
            match m1.lu().solve(&m2) {
                Some(cand) => {
                    let fc = objective(a, b, &cand);
                    if fc <= f - armijo * tau * half * wn2 {
                        f_new = fc;
                        c_new = cand;
                        accepted = true;
                        break;
                    }
                }
                None => {}
            }
            tau *= half;
        }
        if !accepted {
            // no descent step left at this scale
            return (f, true);
        }
        let delta = f - f_new;
        c = c_new;
        f = f_new;
        // relative stagnation: near a zero-residual optimum an absolute
        // threshold would stop orders of magnitude too early
        if delta.abs() < cfg.step_tolerance * f.max(real::<S>(1e-12)) {
            return (f, true);
        }
    }
    (f, false)
}
