//! Independent oracles for the metric stack: a random-search bound for the
//! orthogonal alignment, and invariance of the full DSA pipeline under unit
//! rotations.

use dynabench_core::metrics::{
    delay_embed, dsa_dissimilarity, fit_linear_dynamics, orthogonal_align, DsaConfig,
    DynamicsMatrix,
};
use dynabench_core::seed;
use dynabench_core::tensor::{TensorMeta, TrajectoryTensor};
use nalgebra::DMatrix;
use rand::Rng;

fn random_matrix(d: usize, s: u64) -> DMatrix<f64> {
    let mut rng = seed::rng(s, &[]);
    DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0))
}

fn haar_orthogonal(d: usize, s: u64) -> DMatrix<f64> {
    let g = random_matrix(d, s);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

fn dm(m: DMatrix<f64>) -> DynamicsMatrix<f64> {
    DynamicsMatrix {
        dim: m.nrows(),
        matrix: m,
        fit_residual: 0.0,
    }
}

#[test]
fn alignment_matches_brute_force_random_search() {
    // two seeded 4x4 operators; the oracle draws 1e5 Haar-orthogonal
    // matrices (both components) and takes the best conjugation residual.
    // That is an upper bound on the optimum which the optimizer must reach
    // to within 5%.
    let a = random_matrix(4, 101);
    let b = random_matrix(4, 102);
    let denom = (a.norm() * b.norm()).sqrt();

    let mut best = f64::INFINITY;
    let mut rng = seed::rng(103, &[]);
    for i in 0..100_000u64 {
        let mut q = haar_orthogonal(4, seed::derive(104, &[i]));
        if rng.random_range(0..2) == 1 {
            for r in 0..4 {
                q[(r, 0)] = -q[(r, 0)];
            }
        }
        let v = (&q * &a * q.transpose() - &b).norm() / denom;
        best = best.min(v);
    }

    let cfg = DsaConfig::<f64>::default();
    let s = orthogonal_align(&dm(a), &dm(b), &cfg).unwrap();
    assert!(
        s.value <= best + 1e-9,
        "optimizer {} worse than sampled bound {best}",
        s.value
    );
    assert!(
        best - s.value <= 0.05 * best,
        "optimizer {} vs oracle {best}: gap above 5%",
        s.value
    );
}

#[test]
fn conjugation_recovery_over_many_dimensions() {
    for (i, d) in [(0u64, 3usize), (1, 4), (2, 5), (3, 6), (4, 8)] {
        let a = random_matrix(d, 200 + i);
        let q = {
            let mut q = haar_orthogonal(d, 300 + i);
            if i % 2 == 1 {
                for r in 0..d {
                    q[(r, 0)] = -q[(r, 0)];
                }
            }
            q
        };
        let conj = &q * &a * q.transpose();
        let cfg = DsaConfig {
            restarts: 24,
            ..DsaConfig::<f64>::default()
        };
        let s = orthogonal_align(&dm(a), &dm(conj), &cfg).unwrap();
        assert!(s.value < 1e-4, "d={d}: value {}", s.value);
    }
}

fn smooth_tensor(c: usize, t: usize, n: usize, s: u64) -> TrajectoryTensor<f64> {
    // smooth low-dimensional trajectories give the dynamics fit something
    // structured, as the benchmarks do
    let mut rng = seed::rng(s, &[]);
    let freqs: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.4)).collect();
    let phases: Vec<f64> = (0..c * n).map(|_| rng.random_range(0.0..6.28)).collect();
    TrajectoryTensor::from_fn(c, t, n, TensorMeta::default(), |ci, ti, ni| {
        (freqs[ni] * ti as f64 + phases[ci * n + ni]).sin()
            + 0.3 * (0.5 * freqs[ni] * ti as f64).cos()
    })
    .unwrap()
}

#[test]
fn dsa_is_invariant_to_unit_rotations() {
    let cfg = DsaConfig {
        n_delays: 8,
        delay_interval: 3,
        restarts: 24,
        ..DsaConfig::<f64>::default()
    };
    for i in 0..5u64 {
        let x = smooth_tensor(6, 80, 4, 400 + i);
        let q = haar_orthogonal(4, 500 + i);
        let rotated = x.samples_matrix() * &q;
        let y =
            TrajectoryTensor::from_samples_matrix(&rotated, 6, 80, TensorMeta::default()).unwrap();
        let s = dsa_dissimilarity(&x, &y, &cfg).unwrap();
        assert!(s.value < 1e-3, "case {i}: {}", s.value);
        let self_s = dsa_dissimilarity(&x, &x, &cfg).unwrap();
        assert!(self_s.value < cfg.step_tolerance.sqrt());
    }
}

#[test]
fn dsa_pipeline_scores_noisy_copy_above_self() {
    let cfg = DsaConfig {
        n_delays: 6,
        delay_interval: 2,
        ..DsaConfig::<f64>::default()
    };
    let x = smooth_tensor(5, 60, 3, 600);
    let mut rng = seed::rng(601, &[]);
    let noisy = TrajectoryTensor::new(
        x.as_slice()
            .iter()
            .map(|v| v + rng.random_range(-0.3..0.3))
            .collect(),
        5,
        60,
        3,
        TensorMeta::default(),
    )
    .unwrap();
    let self_score = dsa_dissimilarity(&x, &x, &cfg).unwrap().value;
    let noisy_score = dsa_dissimilarity(&x, &noisy, &cfg).unwrap().value;
    assert!(noisy_score > self_score);
    assert!(noisy_score > 1e-3);
}

#[test]
fn embedding_and_fit_compose_for_known_sizes() {
    let x = smooth_tensor(3, 50, 2, 700);
    let cfg = DsaConfig {
        n_delays: 5,
        delay_interval: 4,
        ..DsaConfig::<f64>::default()
    };
    let (hp, hn) = delay_embed(&x, &cfg).unwrap();
    // rows per condition: 50 - 4*4 = 34, pairs 33
    assert_eq!(hp.nrows(), 3 * 33);
    assert_eq!(hp.ncols(), 10);
    let fit = fit_linear_dynamics(&hp, &hn, &cfg).unwrap();
    assert!(fit.dim >= 1 && fit.dim <= 10);
    assert!(fit.fit_residual.is_finite());
}
