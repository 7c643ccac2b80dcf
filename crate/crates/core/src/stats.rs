//! Ordinary least squares with slope inference, Welch's two-sample t-test,
//! Benjamini–Hochberg FDR correction, and bootstrap standard errors.
//!
//! The t-distribution tail is evaluated through the regularized incomplete
//! beta function (Lentz continued fraction, 1e-12 tolerance); no external
//! statistics crate is involved, so tests can check it against an
//! independent quadrature oracle.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{from_count, real, Real};
use crate::seed;

/// Result of a simple linear regression `y = slope * x + intercept`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionResult<S> {
    pub slope: S,
    pub intercept: S,
    /// Two-sided p-value for the slope (t distribution, n-2 df). `None` when
    /// n < 3 or the residual variance is exactly zero on a nonzero slope.
    pub slope_p_value: Option<S>,
    pub r2: S,
    pub n: usize,
}

/// Result of a two-sample test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult<S> {
    pub t_statistic: S,
    pub raw_p: S,
    /// Multiple-comparison adjusted p; filled in by [`adjust_tests`].
    pub adjusted_p: Option<S>,
    pub df: S,
}

/// Closed-form least squares of `ys` on `xs`, with slope inference.
pub fn ols<S: Real>(xs: &[S], ys: &[S]) -> Result<RegressionResult<S>> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension(format!(
            "ols: {} xs vs {} ys",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::DegenerateInput("ols needs n >= 2".into()));
    }
    let nf = from_count::<S>(n);
    let mx = xs.iter().copied().sum::<S>() / nf;
    let my = ys.iter().copied().sum::<S>() / nf;
    let mut sxx = S::zero();
    let mut sxy = S::zero();
    let mut syy = S::zero();
    for i in 0..n {
        let dx = xs[i] - mx;
        let dy = ys[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == S::zero() {
        return Err(Error::DegenerateInput("ols: zero x-variance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = (syy - slope * sxy).max(S::zero());
    let r2 = if syy == S::zero() {
        // flat response: the fit reproduces it exactly
        S::one()
    } else {
        (S::one() - ss_res / syy).clamp(S::zero(), S::one())
    };
    let slope_p_value = if n >= 3 {
        let df = from_count::<S>(n - 2);
        if ss_res == S::zero() {
            // an exact fit: p -> 0 for a nonzero slope, 1 for a zero slope
            Some(if slope == S::zero() { S::one() } else { S::zero() })
        } else {
            let se = (ss_res / (df * sxx)).sqrt();
            let t = slope / se;
            Some(two_sided_t_p(t, df))
        }
    } else {
        None
    };
    Ok(RegressionResult {
        slope,
        intercept,
        slope_p_value,
        r2,
        n,
    })
}

/// Welch's two-sample t-test with Welch–Satterthwaite degrees of freedom.
pub fn welch_ttest<S: Real>(a: &[S], b: &[S]) -> Result<TestResult<S>> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::DegenerateInput(
            "welch_ttest needs n >= 2 per sample".into(),
        ));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let na = from_count::<S>(a.len());
    let nb = from_count::<S>(b.len());
    let sa = va / na;
    let sb = vb / nb;
    let pooled = sa + sb;
    if pooled == S::zero() {
        return Err(Error::DegenerateInput(
            "welch_ttest: both samples have zero variance".into(),
        ));
    }
    let t = (ma - mb) / pooled.sqrt();
    let mut df_den = S::zero();
    if sa > S::zero() {
        df_den += sa * sa / (na - S::one());
    }
    if sb > S::zero() {
        df_den += sb * sb / (nb - S::one());
    }
    let df = pooled * pooled / df_den;
    Ok(TestResult {
        t_statistic: t,
        raw_p: two_sided_t_p(t, df),
        adjusted_p: None,
        df,
    })
}

/// Benjamini–Hochberg step-up adjustment. Output order matches input order.
pub fn bh_fdr<S: Real>(p_values: &[S]) -> Vec<S> {
    let m = p_values.len();
    if m == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].partial_cmp(&p_values[j]).unwrap());
    let mf = from_count::<S>(m);
    let mut adjusted = vec![S::zero(); m];
    let mut running_min = S::one();
    for rank in (0..m).rev() {
        let idx = order[rank];
        let scaled = (p_values[idx] * mf / from_count::<S>(rank + 1)).min(S::one());
        running_min = running_min.min(scaled);
        // p*(m/j) >= p holds exactly in real arithmetic; guard the rounding
        adjusted[idx] = running_min.max(p_values[idx]);
    }
    adjusted
}

/// Fills `adjusted_p` across a family of tests using BH-FDR.
pub fn adjust_tests<S: Real>(tests: &mut [TestResult<S>]) {
    let raw: Vec<S> = tests.iter().map(|t| t.raw_p).collect();
    for (t, adj) in tests.iter_mut().zip(bh_fdr(&raw)) {
        t.adjusted_p = Some(adj);
    }
}

/// Standard deviation of resampled means over seeded draws with replacement.
pub fn bootstrap_se<S: Real>(values: &[S], resamples: usize, seed: u64) -> Result<S> {
    if values.len() < 2 {
        return Err(Error::DegenerateInput("bootstrap_se needs n >= 2".into()));
    }
    if resamples == 0 {
        return Err(Error::Config("bootstrap_se needs resamples >= 1".into()));
    }
    let mut rng = seed::rng(seed, &[0x626f_6f74]);
    let n = values.len();
    let nf = from_count::<S>(n);
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut acc = S::zero();
        for _ in 0..n {
            acc += values[rng.random_range(0..n)];
        }
        means.push(acc / nf);
    }
    let (_, var) = mean_var(&means);
    // population variance of the resampled means
    let k = from_count::<S>(resamples);
    Ok((var * (k - S::one()) / k).sqrt())
}

/// Sample mean and unbiased variance.
pub fn mean_var<S: Real>(xs: &[S]) -> (S, S) {
    let n = from_count::<S>(xs.len());
    let mean = xs.iter().copied().sum::<S>() / n;
    if xs.len() < 2 {
        return (mean, S::zero());
    }
    let ss = xs
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .fold(S::zero(), |a, b| a + b);
    (mean, ss / (n - S::one()))
}

pub fn mean<S: Real>(xs: &[S]) -> S {
    mean_var(xs).0
}

/// Median over a copy of the slice; averages the middle pair for even n.
pub fn median<S: Real>(xs: &[S]) -> S {
    assert!(!xs.is_empty(), "median of empty slice");
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / real::<S>(2.0)
    }
}

/// Two-sided p-value of a t statistic with (possibly fractional) df.
pub fn two_sided_t_p<S: Real>(t: S, df: S) -> S {
    if !t.is_finite() {
        return S::zero();
    }
    let x = df / (df + t * t);
    // P(|T| > t) = I_x(df/2, 1/2)
    reg_inc_beta(df / real::<S>(2.0), real::<S>(0.5), x).clamp(S::zero(), S::one())
}

/// Regularized incomplete beta function I_x(a, b) via the Lentz continued
/// fraction, tolerance 1e-12.
pub fn reg_inc_beta<S: Real>(a: S, b: S, x: S) -> S {
    if x <= S::zero() {
        return S::zero();
    }
    if x >= S::one() {
        return S::one();
    }
    // front factor x^a (1-x)^b / (a B(a, b))
    let ln_front = a * x.ln() + b * (S::one() - x).ln() + ln_gamma(a + b)
        - ln_gamma(a)
        - ln_gamma(b);
    let front = ln_front.exp();
    // the continued fraction converges fastest for x < (a+1)/(a+b+2)
    if x < (a + S::one()) / (a + b + real::<S>(2.0)) {
        front * beta_cf(a, b, x) / a
    } else {
        S::one() - front * beta_cf(b, a, S::one() - x) / b
    }
}

fn beta_cf<S: Real>(a: S, b: S, x: S) -> S {
    let tiny = real::<S>(1e-300);
    let eps = real::<S>(1e-12);
    let one = S::one();
    let qab = a + b;
    let qap = a + one;
    let qam = a - one;
    let mut c = one;
    let mut d = one - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = one / d;
    let mut h = d;
    for m in 1..400 {
        let mf = from_count::<S>(m);
        let m2 = real::<S>(2.0) * mf;
        // even step
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        h *= d * c;
        // odd step
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        let del = d * c;
        h *= del;
        if (del - one).abs() < eps {
            break;
        }
    }
    h
}

/// Log-gamma via the Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma<S: Real>(z: S) -> S {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let half = real::<S>(0.5);
    if z < half {
        // reflection formula
        let pi = S::pi();
        return (pi / (pi * z).sin()).ln() - ln_gamma(S::one() - z);
    }
    let z = z - S::one();
    let mut acc = real::<S>(COEFFS[0]);
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc += real::<S>(c) / (z + from_count::<S>(i));
    }
    let t = z + real::<S>(7.5);
    let ln_sqrt_2pi = real::<S>(0.918_938_533_204_672_74);
    ln_sqrt_2pi + (z + half) * t.ln() - t + acc.ln()
}
