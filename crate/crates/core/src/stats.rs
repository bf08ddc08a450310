//! Gaussian functions, empirical distribution distances and the classical
//! goodness-of-fit tests used by the limit checks.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `Φ(x)`, via `erfc` so the lower tail keeps full relative precision.
/// The musl `erfc` is used because it is accurate to about one ulp.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `η(x)`, the standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// DKW half-width `√(ln(2/δ) / 2N)` for the sup distance of an ECDF.
pub fn dkw_se(n: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Confidence level used by every statistical gate.
pub const DELTA: f64 = 1e-3;

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `sup_a |F̂(a) − F(a)|` for a continuous non-decreasing `F`, exact: it is
/// attained at the jumps of the ECDF.
pub fn kolmogorov_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut best = 0.0f64;
    let mut i = 0;
    while i < sorted.len() {
        // Ties form a single jump from i/N to j/N.
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let f = cdf(sorted[i]);
        best = best.max((j as f64 / n - f).abs()).max((i as f64 / n - f).abs());
        i = j;
    }
    best
}

/// `F̂(a)`: fraction of the sample at or below `a`.
pub fn ecdf(sorted: &[f64], a: f64) -> f64 {
    sorted.partition_point(|&y| y <= a) as f64 / sorted.len() as f64
}

/// `sup_a |F̂(a) − G(a)|` for a smooth `G` that need not be monotone.
///
/// Between jumps the difference is `const − G`, so the supremum is attained
/// at a jump (either side) or at a critical point of `G`; `extra` lists the
/// critical points and any further evaluation points.
pub fn sup_distance(sorted: &[f64], g: impl Fn(f64) -> f64, extra: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mut best = 0.0f64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let v = g(sorted[i]);
        best = best.max((j as f64 / n - v).abs()).max((i as f64 / n - v).abs());
        i = j;
    }
    for &a in extra {
        // F̂ is right-continuous; also check the left limit at a.
        let v = g(a);
        let right = ecdf(sorted, a);
        let left = sorted.partition_point(|&y| y < a) as f64 / n;
        best = best.max((right - v).abs()).max((left - v).abs());
    }
    best
}

/// `a_k = −5 + k/200`, `k = 0..=2000`.
pub fn standard_grid() -> Vec<f64> {
    (0..=2000).map(|k| -5.0 + k as f64 * 0.005).collect()
}

/// Asymptotic Kolmogorov tail `P(K > λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test with the Stephens small-sample
/// correction.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestResult {
    let (sa, sb) = (sorted(a), sorted(b));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    TestResult { statistic: d, p_value: kolmogorov_tail((ne + 0.12 + 0.11 / ne) * d) }
}

/// Pearson chi-square goodness-of-fit of `counts` against `probs`; cells
/// with zero probability must be empty.
pub fn chi_square_test(counts: &[u64], probs: &[f64]) -> TestResult {
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        if p <= 0.0 {
            if c > 0 {
                return TestResult { statistic: f64::INFINITY, p_value: 0.0 };
            }
            continue;
        }
        let e = p * total as f64;
        stat += (c as f64 - e).powi(2) / e;
        cells += 1;
    }
    if cells < 2 {
        return TestResult { statistic: 0.0, p_value: 1.0 };
    }
    let dist = ChiSquared::new((cells - 1) as f64).expect("positive degrees of freedom");
    TestResult { statistic: stat, p_value: 1.0 - dist.cdf(stat) }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn correlation(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    let scale = mx.abs().max(my.abs()).max(1.0);
    if sxx <= 1e-24 * scale * scale * x.len() as f64 || syy <= 1e-24 * scale * scale * y.len() as f64 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Real roots of `a x³ + b x² + c x + d` (leading zeros allowed).
pub fn real_cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-300 * scale {
        if b.abs() <= 1e-300 * scale {
            return if c != 0.0 { vec![-d / c] } else { Vec::new() };
        }
        let disc = c * c - 4.0 * b * d;
        if disc < 0.0 {
            return Vec::new();
        }
        let q = -0.5 * (c + c.signum() * disc.sqrt());
        let mut roots = vec![];
        if q != 0.0 {
            roots.push(q / b);
            roots.push(d / q);
        } else {
            roots.push(0.0);
        }
        return roots;
    }
    let companion = nalgebra::DMatrix::from_row_slice(
        3,
        3,
        &[-b / a, -c / a, -d / a, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    );
    let eig = crate::linalg::eigenvalues(&crate::linalg::to_complex(&companion));
    eig.iter()
        .filter(|z| z.im.abs() <= 1e-9 * z.re.abs().max(1.0))
        .map(|z| {
            // One Newton polish on the real polynomial.
            let x = z.re;
            let f = ((a * x + b) * x + c) * x + d;
            let fp = (3.0 * a * x + 2.0 * b) * x + c;
            if fp != 0.0 {
                x - f / fp
            } else {
                x
            }
        })
        .collect()
}
