//! M-estimation of a scalar parameter from one path of a parametric
//! finite-state chain, and a uniform Berry–Esseen check for the estimator.
//!
//! The parameter set is a finite grid of kernels `P_θ`. The estimator
//! minimizes `M_n(α) = (1/n) Σ F(α, X_{k−1}, X_k)` over an open interval
//! `𝒜`; it depends on the path only through the transition counts.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{spectral_gap_report, StochasticKernel};
use crate::error::{Condition, Error, Result};
use crate::io::KernelFile;
use crate::model::{variance_scalar, IncrementLaw, MapSpec, MomentRecursion};
use crate::montecarlo::{derive_seed, open_uniform, path_rng};
use crate::stats::{dkw_se, kolmogorov_distance, normal_cdf, sorted, DELTA};

/// Root-finding target for the population first-order condition.
pub const ALPHA0_TOL: f64 = 1e-12;
/// Largest admissible `|E_θ[F1(α₀)]|` and `|M_n⁽¹⁾(α̂)|`.
pub const FIRST_ORDER_TOL: f64 = 1e-10;
/// Points of the global α-scan used before polishing.
pub const ALPHA_SCAN: usize = 256;
/// Horizon of the `n · |σ² − E[Y_n²]/n|` certificate.
pub const CERTIFY_HORIZON: usize = 4096;
pub const CERTIFY_REFERENCE: usize = 1024;
pub const CERTIFY_RATIO: f64 = 1.5;
/// Flatness gate of `max_θ √n·K` across `n`.
pub const FLAT_RATIO: f64 = 2.0;
const SERIES_TOL: f64 = 1e-13;
const DEGENERATE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastKind {
    /// `F = (ξ − α)²`.
    Mean,
    /// `F = ln cosh(ξ − α)`.
    LogCosh,
    /// `F = 1 − cos(ξ − α)`.
    Cosine,
}

impl ContrastKind {
    /// `(f(u), f′(u), f″(u))` with `u = ξ − α`.
    fn profile(self, u: f64) -> (f64, f64, f64) {
        match self {
            ContrastKind::Mean => (u * u, 2.0 * u, 2.0),
            ContrastKind::LogCosh => {
                let a = u.abs();
                let sech = 1.0 / u.cosh();
                (a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2, u.tanh(), sech * sech)
            }
            ContrastKind::Cosine => (1.0 - u.cos(), u.sin(), u.cos()),
        }
    }
}

/// `F(α, x, y) = scale · f(ξ(x, y) − α)` with a per-state Lipschitz witness
/// `W` for `F2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastFamily {
    pub kind: ContrastKind,
    /// Open interval `𝒜`.
    pub alpha_domain: [f64; 2],
    /// `ξ(x, y)`, one row per `x`.
    pub xi: Vec<Vec<f64>>,
    /// `W(x)`, one entry per state.
    pub w: Vec<f64>,
    #[serde(default = "unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl ContrastFamily {
    pub fn f(&self, alpha: f64, x: usize, y: usize) -> f64 {
        self.scale * self.kind.profile(self.xi[x][y] - alpha).0
    }

    /// `∂F/∂α`.
    pub fn f1(&self, alpha: f64, x: usize, y: usize) -> f64 {
        -self.scale * self.kind.profile(self.xi[x][y] - alpha).1
    }

    /// `∂²F/∂α²`.
    pub fn f2(&self, alpha: f64, x: usize, y: usize) -> f64 {
        self.scale * self.kind.profile(self.xi[x][y] - alpha).2
    }

    pub fn size(&self) -> usize {
        self.xi.len()
    }

    fn validate(&self) -> Result<()> {
        let [lo, hi] = self.alpha_domain;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha domain ({lo}, {hi}) is not an interval")));
        }
        let s = self.size();
        if s == 0 || self.xi.iter().any(|r| r.len() != s) || self.w.len() != s {
            return Err(Error::DimensionMismatch("xi must be SxS and w must have S entries".into()));
        }
        if !(self.scale > 0.0) || self.w.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("scale must be positive and W non-negative".into()));
        }
        Ok(())
    }

    /// Sampled checks that `F1` is the derivative of `F` and that `W`
    /// dominates the variation of `F2`.
    pub fn verify(&self, samples: usize, seed: u64) -> Result<()> {
        self.validate()?;
        let mut rng = path_rng(seed, 0);
        let [lo, hi] = self.alpha_domain;
        let s = self.size();
        let h = 1e-5;
        for _ in 0..samples {
            let a = lo + (hi - lo) * open_uniform(&mut rng);
            let b = lo + (hi - lo) * open_uniform(&mut rng);
            let x = (rng.next_u64() % s as u64) as usize;
            let y = (rng.next_u64() % s as u64) as usize;
            let fd = (self.f(a + h, x, y) - self.f(a - h, x, y)) / (2.0 * h);
            if (self.f1(a, x, y) - fd).abs() > 1e-6 {
                return Err(Error::InvalidParameter(format!("F1 disagrees with dF/dalpha at alpha = {a}")));
            }
            let lhs = (self.f2(a, x, y) - self.f2(b, x, y)).abs();
            if lhs > (a - b).abs() * (self.w[x] + self.w[y]) * (1.0 + 1e-12) + 1e-14 {
                return Err(Error::ConditionViolated {
                    condition: Condition::V5,
                    theta: 0,
                    detail: format!("|F2({a}) - F2({b})| = {lhs} on ({x},{y}) exceeds the W bound"),
                });
            }
        }
        Ok(())
    }

    /// The MAP `(X_n, Σ g(X_{k−1}, X_k))` for an edge function `g`.
    fn functional_map(&self, kernel: &StochasticKernel, g: impl Fn(usize, usize) -> f64) -> Result<MapSpec> {
        let s = kernel.size();
        let incs = (0..s)
            .flat_map(|x| (0..s).map(move |y| (x, y)))
            .filter(|&(x, y)| kernel.matrix()[(x, y)] > 0.0)
            .map(|(x, y)| (x, y, IncrementLaw::deterministic(g(x, y))))
            .collect();
        MapSpec::new(kernel.clone(), 1, incs, true)
    }

    fn stationary_mean(&self, kernel: &StochasticKernel, g: impl Fn(usize, usize) -> f64) -> f64 {
        let (p, pi) = (kernel.matrix(), kernel.pi());
        let s = kernel.size();
        (0..s).flat_map(|x| (0..s).map(move |y| (x, y))).map(|(x, y)| pi[x] * p[(x, y)] * g(x, y)).sum()
    }
}

/// Per-θ quantities of the limit law.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaSummary {
    pub alpha0: f64,
    /// `E_θ[F1(α₀)]`, zero up to root-finding accuracy.
    pub first_order_residual: f64,
    /// `m(θ) = E_θ[F2(α₀)]`.
    pub m: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// `τ = σ₁/m`.
    pub tau: f64,
    /// `E_θ[W(X₀)]`.
    pub mean_w: f64,
}

/// `‖P_θⁿ − Π_θ‖₂ ≤ C κⁿ` for every θ on the grid, `n ≤ 63`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniformGap {
    pub c: f64,
    pub kappa: f64,
}

/// `n · |σ₁² − E_θ[Y_n²]/n|` for the MAP of `F1(α₀)`, computed exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceCertificate {
    pub theta: usize,
    /// Values at `n = 2, 4, …, 2¹²`.
    pub dyadic: Vec<(usize, f64)>,
    /// Maximum over every `n ∈ [2, CERTIFY_HORIZON]`.
    pub max_scaled_gap: f64,
    pub at_reference: f64,
    pub bounded: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MEstimationProblem {
    pub family: ContrastFamily,
    pub kernels: Vec<KernelFile>,
    #[serde(skip)]
    chains: Vec<StochasticKernel>,
    pub thetas: Vec<ThetaSummary>,
    pub uniform_gap: UniformGap,
    /// `d = inf m / (4 (E W + 1))`.
    pub d_ball: f64,
    pub certificates: Vec<VarianceCertificate>,
    /// `σ₂ = 0` is accepted when `F2` is constant on every supported edge.
    pub constant_f2: bool,
}

impl MEstimationProblem {
    pub fn kernel(&self, theta: usize) -> &StochasticKernel {
        &self.chains[theta]
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }
}

fn violated(condition: Condition, theta: usize, detail: String) -> Error {
    Error::ConditionViolated { condition, theta, detail }
}

/// Sign changes of `g` on the scan grid of the open interval.
fn sign_brackets(lo: f64, hi: f64, g: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    let pts: Vec<f64> = (1..ALPHA_SCAN).map(|i| lo + (hi - lo) * i as f64 / ALPHA_SCAN as f64).collect();
    let vals: Vec<f64> = pts.iter().map(|&a| g(a)).collect();
    let mut out = Vec::new();
    for i in 0..pts.len() {
        if vals[i] == 0.0 {
            out.push((pts[i], pts[i]));
        } else if i + 1 < pts.len() && vals[i] * vals[i + 1] < 0.0 {
            out.push((pts[i], pts[i + 1]));
        }
    }
    out
}

/// Newton on an increasing `g` with bisection safeguard inside `[a, b]`,
/// where `g(a) ≤ 0 ≤ g(b)`.
fn safeguarded_newton(mut a: f64, mut b: f64, g: impl Fn(f64) -> (f64, f64), tol: f64) -> f64 {
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (f, df) = g(x);
        if f.abs() <= tol || b - a <= f64::EPSILON * x.abs().max(1.0) {
            break;
        }
        if f < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = x - f / df;
        x = if df > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
    }
    x
}

pub fn build_problem(family: ContrastFamily, theta_grid: Vec<StochasticKernel>) -> Result<MEstimationProblem> {
    family.validate()?;
    if theta_grid.is_empty() {
        return Err(Error::InvalidParameter("empty theta grid".into()));
    }
    let [lo, hi] = family.alpha_domain;
    let s = family.size();
    // The series below need a gap, so check it first.
    let uniform_gap = uniform_gap(&theta_grid)?;
    let mut thetas = Vec::new();
    let mut certificates = Vec::new();
    let mut constant_f2 = true;
    for (t, kernel) in theta_grid.iter().enumerate() {
        if kernel.size() != s {
            return Err(Error::DimensionMismatch(format!("kernel {t} has {} states, family has {s}", kernel.size())));
        }
        let g = |a: f64| family.stationary_mean(kernel, |x, y| family.f1(a, x, y));
        let dg = |a: f64| family.stationary_mean(kernel, |x, y| family.f2(a, x, y));
        let brackets = sign_brackets(lo, hi, g);
        let (a, b) = match brackets.as_slice() {
            [one] => *one,
            [] => return Err(violated(Condition::V1, t, "population first-order condition has no root".into())),
            many => {
                return Err(violated(Condition::V1, t, format!("{} roots of the first-order condition", many.len())))
            }
        };
        let alpha0 = if a == b {
            a
        } else {
            // Orient so the function rises across the bracket.
            let sign = if g(a) <= 0.0 { 1.0 } else { -1.0 };
            safeguarded_newton(a, b, |x| (sign * g(x), sign * dg(x)), ALPHA0_TOL)
        };
        let residual = g(alpha0);
        if residual.abs() > FIRST_ORDER_TOL {
            return Err(violated(Condition::V1, t, format!("E[F1(alpha0)] = {residual:e}")));
        }
        let m = dg(alpha0);
        if !(m > 0.0) {
            return Err(violated(Condition::V2, t, format!("m = {m}")));
        }
        let map1 = family.functional_map(kernel, |x, y| family.f1(alpha0, x, y))?;
        let sigma1_sq = variance_scalar(&map1, SERIES_TOL)?;
        if sigma1_sq <= DEGENERATE {
            return Err(Error::DegenerateVariance { sigma2: sigma1_sq });
        }
        let map2 = family.functional_map(kernel, |x, y| family.f2(alpha0, x, y) - m)?;
        let edge_f2: Vec<f64> = (0..s)
            .flat_map(|x| (0..s).map(move |y| (x, y)))
            .filter(|&(x, y)| kernel.matrix()[(x, y)] > 0.0)
            .map(|(x, y)| family.f2(alpha0, x, y))
            .collect();
        let f2_constant = edge_f2.iter().all(|v| (v - edge_f2[0]).abs() <= 1e-14 * v.abs().max(1.0));
        constant_f2 &= f2_constant;
        let sigma2_sq = if f2_constant { 0.0 } else { variance_scalar(&map2, SERIES_TOL)? };
        if !f2_constant && sigma2_sq <= DEGENERATE {
            return Err(violated(Condition::V4, t, format!("sigma2^2 = {sigma2_sq:e}")));
        }
        let mean_w: f64 = (0..s).map(|x| kernel.pi()[x] * family.w[x]).sum();
        thetas.push(ThetaSummary {
            alpha0,
            first_order_residual: residual,
            m,
            sigma1: sigma1_sq.sqrt(),
            sigma2: sigma2_sq.sqrt(),
            tau: sigma1_sq.sqrt() / m,
            mean_w,
        });
        certificates.push(certify_variance(t, &map1, sigma1_sq)?);
    }
    let d_ball = thetas.iter().map(|th| th.m / (4.0 * (th.mean_w + 1.0))).fold(f64::INFINITY, f64::min);
    Ok(MEstimationProblem {
        kernels: theta_grid.iter().map(KernelFile::from_kernel).collect(),
        chains: theta_grid,
        family,
        thetas,
        uniform_gap,
        d_ball,
        certificates,
        constant_f2,
    })
}

fn certify_variance(theta: usize, map: &MapSpec, sigma_sq: f64) -> Result<VarianceCertificate> {
    let mut rec = MomentRecursion::new(map, map.kernel().pi(), 2)?;
    let mut dyadic = Vec::new();
    let mut max_scaled_gap = 0.0f64;
    let mut at_reference = 0.0;
    for n in 1..=CERTIFY_HORIZON {
        rec.step();
        let scaled = (n as f64 * sigma_sq - rec.moments()[2]).abs();
        if n >= 2 {
            max_scaled_gap = max_scaled_gap.max(scaled);
        }
        if n.is_power_of_two() && n >= 2 {
            dyadic.push((n, scaled));
        }
        if n == CERTIFY_REFERENCE {
            at_reference = scaled;
        }
    }
    // With no serial correlation the gap is pure roundoff.
    let floor = 1e-9 * sigma_sq.max(1.0);
    Ok(VarianceCertificate {
        theta,
        dyadic,
        max_scaled_gap,
        at_reference,
        bounded: max_scaled_gap <= CERTIFY_RATIO * at_reference + floor,
    })
}

const GAP_HORIZON: usize = 64;

fn uniform_gap(grid: &[StochasticKernel]) -> Result<UniformGap> {
    let mut tables = Vec::new();
    let mut kappa = 0.0f64;
    for (t, k) in grid.iter().enumerate() {
        let table = spectral_gap_report(k, GAP_HORIZON)?;
        if !table.gap_present {
            return Err(violated(Condition::UniformGap, t, "no L2 contraction".into()));
        }
        if let Some(eps) = table.epsilon {
            kappa = kappa.max((-eps).exp());
        }
        tables.push(table);
    }
    if kappa >= 1.0 {
        return Err(violated(Condition::UniformGap, 0, format!("shared rate kappa = {kappa}")));
    }
    // bound(t) is ‖P^{t−1} − Π‖, so power n = t − 1.
    let c = tables
        .iter()
        .flat_map(|tb| tb.bounds.iter().filter(|b| b.t >= 2))
        .map(|b| if b.bound == 0.0 { 0.0 } else { b.bound / kappa.powi(b.t as i32 - 1) })
        .fold(0.0, f64::max);
    Ok(UniformGap { c, kappa })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EstimatorRun {
    pub theta: usize,
    pub n: usize,
    pub alpha_hat: f64,
    /// `|M_n⁽¹⁾(α̂)|`.
    pub residual: f64,
    /// `√n (α̂ − α₀) / τ(θ)`.
    pub standardized: f64,
}

/// Minimizer of `Σ w(x, y) F(α, x, y)`: global α-scan, then safeguarded
/// Newton on the first-order condition around the best scan point.
pub fn minimize_contrast(family: &ContrastFamily, weights: &[f64]) -> Result<(f64, f64)> {
    let s = family.size();
    let edges: Vec<(usize, usize, f64)> =
        (0..s * s).filter(|&k| weights[k] != 0.0).map(|k| (k / s, k % s, weights[k])).collect();
    let m = |a: f64| edges.iter().map(|&(x, y, w)| w * family.f(a, x, y)).sum::<f64>();
    let m1 = |a: f64| edges.iter().map(|&(x, y, w)| w * family.f1(a, x, y)).sum::<f64>();
    let m2 = |a: f64| edges.iter().map(|&(x, y, w)| w * family.f2(a, x, y)).sum::<f64>();
    let [lo, hi] = family.alpha_domain;
    let node = |i: usize| lo + (hi - lo) * i as f64 / ALPHA_SCAN as f64;
    let best = (1..ALPHA_SCAN)
        .map(|i| (i, m(node(i))))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
        .0;
    let (a, b) = (node(best - 1), node(best + 1));
    if !(m1(a) <= 0.0 && m1(b) >= 0.0) {
        return Err(Error::NoInteriorRoot);
    }
    let alpha = safeguarded_newton(a, b, |x| (m1(x), m2(x)), 1e-13 * family.scale);
    Ok((alpha, m1(alpha).abs()))
}

fn cumulative(kernel: &StochasticKernel) -> (Vec<f64>, Vec<Vec<f64>>) {
    let acc = |v: &mut Vec<f64>| {
        let mut c = 0.0;
        for x in v.iter_mut() {
            c += *x;
            *x = c;
        }
    };
    let mut pi = kernel.pi().to_vec();
    acc(&mut pi);
    let rows = (0..kernel.size())
        .map(|i| {
            let mut r: Vec<f64> = kernel.matrix().row(i).iter().copied().collect();
            acc(&mut r);
            r
        })
        .collect();
    (pi, rows)
}

fn pick(cum: &[f64], u: f64) -> usize {
    let last = cum.len() - 1;
    cum.iter().position(|&c| u < c).unwrap_or(last)
}

/// Transition counts of one stationary path of length `n`, flattened
/// `from * S + to`.
fn transition_counts(cum_pi: &[f64], rows: &[Vec<f64>], n: usize, seed: u64, rep: u64) -> Vec<u32> {
    let s = rows.len();
    let mut rng = path_rng(seed, rep);
    let mut counts = vec![0u32; s * s];
    let mut x = pick(cum_pi, open_uniform(&mut rng));
    for _ in 0..n {
        let y = pick(&rows[x], open_uniform(&mut rng));
        counts[x * s + y] += 1;
        x = y;
    }
    counts
}

fn run_from_counts(problem: &MEstimationProblem, theta: usize, n: usize, counts: &[u32]) -> Result<EstimatorRun> {
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let (alpha_hat, residual) = minimize_contrast(&problem.family, &weights)?;
    let th = &problem.thetas[theta];
    Ok(EstimatorRun {
        theta,
        n,
        alpha_hat,
        residual,
        standardized: (n as f64).sqrt() * (alpha_hat - th.alpha0) / th.tau,
    })
}

fn check_theta(problem: &MEstimationProblem, theta: usize, n: usize) -> Result<()> {
    if theta >= problem.len() {
        return Err(Error::InvalidParameter(format!("theta index {theta} out of range")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    Ok(())
}

/// One estimator run on a stationary path under `P_θ`.
pub fn estimate(problem: &MEstimationProblem, theta: usize, n: usize, seed: u64) -> Result<EstimatorRun> {
    check_theta(problem, theta, n)?;
    let (cum_pi, rows) = cumulative(problem.kernel(theta));
    run_from_counts(problem, theta, n, &transition_counts(&cum_pi, &rows, n, seed, 0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorRecord {
    pub theta: usize,
    pub n: usize,
    pub replications: usize,
    /// Runs with no interior root or a first-order residual above tolerance.
    pub excluded: usize,
    /// Fraction of runs outside the `d`-ball around `α₀`, exclusions included.
    pub gamma_hat: f64,
    pub kolmogorov: f64,
    pub se: f64,
    pub be_constant: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub d_ball: f64,
    pub records: Vec<EstimatorRecord>,
    /// `max_n max_θ √n (K − se)₊ / min_n max_θ √n (K + se)`.
    pub flat_ratio: f64,
    /// `γ̂_n` of every θ is non-increasing in `n`.
    pub gamma_non_increasing: bool,
    /// `max √n K / (1 + √n γ̂)`, reported without claiming it bounds the
    /// theoretical constant.
    pub c_hat: f64,
    pub verdict: bool,
}

pub fn estimator_be_check(
    problem: &MEstimationProblem,
    n_list: &[usize],
    replications: usize,
    seed: u64,
) -> Result<EstimatorReport> {
    if n_list.is_empty() || replications < 2 {
        return Err(Error::InvalidParameter("need horizons and at least 2 replications".into()));
    }
    let mut records = Vec::new();
    for theta in 0..problem.len() {
        let (cum_pi, rows) = cumulative(problem.kernel(theta));
        let alpha0 = problem.thetas[theta].alpha0;
        for (k, &n) in n_list.iter().enumerate() {
            check_theta(problem, theta, n)?;
            let s = derive_seed(derive_seed(seed, theta as u64), k as u64);
            let runs: Vec<Option<EstimatorRun>> = (0..replications as u64)
                .into_par_iter()
                .map(|rep| {
                    let counts = transition_counts(&cum_pi, &rows, n, s, rep);
                    run_from_counts(problem, theta, n, &counts).ok().filter(|r| r.residual <= FIRST_ORDER_TOL)
                })
                .collect();
            let kept: Vec<f64> = runs.iter().flatten().map(|r| r.standardized).collect();
            let excluded = replications - kept.len();
            let outside = runs.iter().flatten().filter(|r| (r.alpha_hat - alpha0).abs() >= problem.d_ball).count();
            let kolmogorov = kolmogorov_distance(&sorted(&kept), normal_cdf);
            records.push(EstimatorRecord {
                theta,
                n,
                replications,
                excluded,
                gamma_hat: (outside + excluded) as f64 / replications as f64,
                kolmogorov,
                se: dkw_se(kept.len(), DELTA),
                be_constant: (n as f64).sqrt() * kolmogorov,
            });
        }
    }
    let per_n = |f: &dyn Fn(&EstimatorRecord) -> f64| -> Vec<f64> {
        n_list.iter().map(|&n| records.iter().filter(|r| r.n == n).map(f).fold(0.0, f64::max)).collect()
    };
    let lower = per_n(&|r| (r.n as f64).sqrt() * (r.kolmogorov - r.se).max(0.0));
    let upper = per_n(&|r| (r.n as f64).sqrt() * (r.kolmogorov + r.se));
    let flat_ratio =
        lower.iter().copied().fold(0.0, f64::max) / upper.iter().copied().fold(f64::INFINITY, f64::min);
    let gamma_non_increasing = (0..problem.len()).all(|t| {
        let g: Vec<f64> = records.iter().filter(|r| r.theta == t).map(|r| r.gamma_hat).collect();
        g.windows(2).all(|w| w[1] <= w[0])
    });
    let c_hat = records
        .iter()
        .map(|r| r.be_constant / (1.0 + (r.n as f64).sqrt() * r.gamma_hat))
        .fold(0.0, f64::max);
    Ok(EstimatorReport {
        d_ball: problem.d_ball,
        records,
        flat_ratio,
        gamma_non_increasing,
        c_hat,
        verdict: flat_ratio <= FLAT_RATIO && gamma_non_increasing,
    })
}

/// JSON problem file: a contrast family plus the kernel grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(flatten)]
    pub family: ContrastFamily,
    pub theta_grid: Vec<KernelFile>,
}

impl ProblemFile {
    pub fn build(&self) -> Result<MEstimationProblem> {
        let grid = self.theta_grid.iter().map(KernelFile::build).collect::<Result<Vec<_>>>()?;
        build_problem(self.family.clone(), grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_state(a: f64, b: f64) -> StochasticKernel {
        StochasticKernel::from_rows(&[vec![1.0 - a, a], vec![b, 1.0 - b]]).unwrap()
    }

    fn occupation(kind: ContrastKind, w: f64, domain: [f64; 2]) -> ContrastFamily {
        ContrastFamily { kind, alpha_domain: domain, xi: vec![vec![0.0, 1.0]; 2], w: vec![w; 2], scale: 1.0 }
    }

    #[test]
    fn mean_contrast_closed_forms() {
        let (a, b) = (0.3, 0.2);
        let fam = occupation(ContrastKind::Mean, 1.0, [-0.5, 1.5]);
        let p = build_problem(fam, vec![two_state(a, b)]).unwrap();
        let th = &p.thetas[0];
        let pi1 = a / (a + b);
        assert!((th.alpha0 - pi1).abs() < 1e-12);
        assert_eq!(th.m, 2.0);
        // Occupation variance: π₀π₁(1 + ρ)/(1 − ρ) with ρ = 1 − a − b.
        let rho = 1.0 - a - b;
        let var_xi = pi1 * (1.0 - pi1) * (1.0 + rho) / (1.0 - rho);
        assert!((th.sigma1 - 2.0 * var_xi.sqrt()).abs() < 1e-10);
        assert!((th.tau - var_xi.sqrt()).abs() < 1e-10);
        assert!(p.constant_f2 && th.sigma2 == 0.0);
        assert!((p.d_ball - 0.25).abs() < 1e-15);
        assert!(p.certificates[0].bounded);
    }

    #[test]
    fn iid_reduction() {
        let fam = occupation(ContrastKind::Mean, 1.0, [-0.5, 1.5]);
        let p = build_problem(fam, vec![two_state(0.4, 0.6)]).unwrap();
        assert!((p.thetas[0].tau.powi(2) - 0.24).abs() < 1e-12);
    }

    #[test]
    fn two_roots_violate_uniqueness() {
        let fam = occupation(ContrastKind::Cosine, 0.5, [-2.0, 5.0]);
        let err = build_problem(fam, vec![two_state(0.3, 0.2)]).unwrap_err();
        assert!(matches!(err, Error::ConditionViolated { condition: Condition::V1, .. }), "{err}");
    }

    #[test]
    fn degenerate_family() {
        let mut fam = occupation(ContrastKind::Mean, 1.0, [-0.5, 1.5]);
        fam.xi = vec![vec![0.5, 0.5]; 2];
        assert!(matches!(build_problem(fam.clone(), vec![two_state(0.3, 0.2)]), Err(Error::DegenerateVariance { .. })));
        let (alpha, _) = minimize_contrast(&fam, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!((alpha - 0.5).abs() < 1e-12);
    }

    #[test]
    fn family_checks() {
        for (kind, w) in [(ContrastKind::Mean, 1.0), (ContrastKind::LogCosh, 0.385), (ContrastKind::Cosine, 0.5)] {
            occupation(kind, w, [-1.0, 2.0]).verify(2000, 3).unwrap();
        }
        let err = occupation(ContrastKind::LogCosh, 0.1, [-1.0, 2.0]).verify(2000, 3).unwrap_err();
        assert!(matches!(err, Error::ConditionViolated { condition: Condition::V5, .. }));
    }

    #[test]
    fn estimate_is_sample_mean() {
        let fam = occupation(ContrastKind::Mean, 1.0, [-0.5, 1.5]);
        let p = build_problem(fam, vec![two_state(0.3, 0.2)]).unwrap();
        let (cum_pi, rows) = cumulative(p.kernel(0));
        for n in [1usize, 7, 500] {
            let counts = transition_counts(&cum_pi, &rows, n, 11, 0);
            let mean = (counts[1] + counts[3]) as f64 / n as f64;
            let run = estimate(&p, 0, n, 11).unwrap();
            assert!((run.alpha_hat - mean).abs() < 1e-12, "n = {n}");
            assert!(run.residual <= FIRST_ORDER_TOL);
        }
    }

    #[test]
    fn log_cosh_problem() {
        let fam = occupation(ContrastKind::LogCosh, 0.385, [-1.0, 2.0]);
        let p = build_problem(fam, vec![two_state(0.3, 0.2), two_state(0.35, 0.25)]).unwrap();
        for th in &p.thetas {
            assert!(th.first_order_residual.abs() < FIRST_ORDER_TOL);
            assert!(th.sigma2 > 0.0 && th.m > 0.0);
        }
        assert!(!p.constant_f2);
        assert!(p.uniform_gap.kappa < 1.0);
    }

    #[test]
    fn periodic_grid_has_no_uniform_gap() {
        let fam = occupation(ContrastKind::Mean, 1.0, [-0.5, 1.5]);
        let flip = StochasticKernel::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let err = build_problem(fam, vec![two_state(0.3, 0.2), flip]).unwrap_err();
        assert!(matches!(err, Error::ConditionViolated { condition: Condition::UniformGap, theta: 1, .. }), "{err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn scaling_equivariance(c in 0.1f64..10.0, seed in 0u64..1000, n in 1usize..300) {
            let fam = occupation(ContrastKind::LogCosh, 0.385, [-1.0, 2.0]);
            let mut scaled = fam.clone();
            scaled.scale = c;
            let p = build_problem(fam, vec![two_state(0.3, 0.2)]).unwrap();
            let q = build_problem(scaled, vec![two_state(0.3, 0.2)]).unwrap();
            let (a, b) = (estimate(&p, 0, n, seed).unwrap(), estimate(&q, 0, n, seed).unwrap());
            prop_assert!((a.alpha_hat - b.alpha_hat).abs() < 1e-9);
            prop_assert!((a.standardized - b.standardized).abs() < 1e-7 * (1.0 + a.standardized.abs()));
        }
    }
}
