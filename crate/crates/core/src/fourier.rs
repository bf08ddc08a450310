//! Fourier operators `S_t(ζ)`, the dominant eigenvalue branch `λ(ζ)` and the
//! decomposition `S₁(ζ)ⁿ = λ(ζ)ⁿ Π(ζ) + N(ζ)ⁿ`.
//!
//! The branch is realized by eigendecomposition and continued from `ζ = 0`
//! by maximal eigenvector overlap. Contour quadrature of the resolvent is an
//! independent cross-check, not the primary route.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{self, spectral_gap_report};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::model::{CtMapSpec, MapSpec};

/// Branch continuation fails once `|λ| − κ̂` drops below this.
pub const MIN_SEPARATION: f64 = 1e-6;
pub const CONTOUR_NODES: usize = 256;
const OVERLAP_TIE: f64 = 1e-12;
const CONTOUR_CLEARANCE: f64 = 1e-8;

/// Anything with a Fourier semigroup `t ↦ S_t(ζ)`.
pub trait FourierSource {
    fn dim(&self) -> usize;
    fn stationary(&self) -> &[f64];
    /// `S_t(ζ)`; discrete models accept non-negative integer `t` only.
    fn operator(&self, zeta: &[f64], t: f64) -> Result<CMatrix>;
}

impl FourierSource for MapSpec {
    fn dim(&self) -> usize {
        MapSpec::dim(self)
    }

    fn stationary(&self) -> &[f64] {
        self.kernel().pi()
    }

    fn operator(&self, zeta: &[f64], t: f64) -> Result<CMatrix> {
        check_zeta(zeta, self.dim())?;
        if t < 0.0 || t.fract() != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "discrete-time operators need integer t >= 0, got {t}"
            )));
        }
        Ok(linalg::mat_pow(&self.fourier_matrix(zeta), t as u64))
    }
}

impl FourierSource for CtMapSpec {
    fn dim(&self) -> usize {
        1
    }

    fn stationary(&self) -> &[f64] {
        self.pi()
    }

    fn operator(&self, zeta: &[f64], t: f64) -> Result<CMatrix> {
        check_zeta(zeta, 1)?;
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
        }
        Ok(linalg::expm(&(self.fourier_generator(zeta[0]) * Complex64::new(t, 0.0))))
    }
}

fn check_zeta(zeta: &[f64], d: usize) -> Result<()> {
    if zeta.len() != d {
        return Err(Error::DimensionMismatch(format!("zeta has {} components, d = {d}", zeta.len())));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct FourierOperator {
    pub zeta: Vec<f64>,
    pub t: f64,
    pub matrix: CMatrix,
}

pub fn build_fourier<M: FourierSource + ?Sized>(spec: &M, zeta: &[f64], t: f64) -> Result<FourierOperator> {
    Ok(FourierOperator { zeta: zeta.to_vec(), t, matrix: spec.operator(zeta, t)? })
}

/// `‖S_{t+s}(ζ) − S_t(ζ) S_s(ζ)‖₂` on `L²(π)`.
pub fn check_semigroup<M: FourierSource + ?Sized>(spec: &M, zeta: &[f64], s: f64, t: f64) -> Result<f64> {
    let joint = spec.operator(zeta, s + t)?;
    let split = spec.operator(zeta, t)? * spec.operator(zeta, s)?;
    chain::l2_operator_norm(&(joint - split), spec.stationary())
}

/// The dominant eigen-triple at one frequency.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub zeta: Vec<f64>,
    pub lambda: Complex64,
    pub right: CVector,
    pub left: CVector,
    /// Largest modulus among the remaining eigenvalues.
    pub kappa: f64,
    pub separation: f64,
}

impl BranchPoint {
    /// `Π(ζ) = r wᵀ / (wᵀ r)`.
    pub fn projection(&self) -> CMatrix {
        linalg::rank_one_projection(&self.right, &self.left)
    }
}

fn select_branch(m: &CMatrix, zeta: &[f64], prev: Option<&BranchPoint>) -> Result<BranchPoint> {
    let eigs = linalg::eigenvalues(m);
    let chosen = match prev {
        None => {
            // At ζ = 0 the branch starts at the eigenvalue closest to 1.
            (0..eigs.len())
                .min_by(|&a, &b| (eigs[a] - 1.0).norm().total_cmp(&(eigs[b] - 1.0).norm()))
                .expect("non-empty spectrum")
        }
        Some(p) => {
            let pn = p.right.norm();
            let mut best: Option<(usize, f64)> = None;
            for (k, &ev) in eigs.iter().enumerate() {
                let (r, _) = linalg::eigenvector_pair(m, ev);
                let overlap = (r.dotc(&p.right)).norm() / (r.norm() * pn);
                best = match best {
                    None => Some((k, overlap)),
                    Some((bk, bo)) => {
                        // Near-ties in overlap go to the eigenvalue closest to the previous one.
                        let tie_closer = (overlap - bo).abs() <= OVERLAP_TIE
                            && (ev - p.lambda).norm() < (eigs[bk] - p.lambda).norm();
                        if overlap > bo + OVERLAP_TIE || tie_closer {
                            Some((k, overlap))
                        } else {
                            Some((bk, bo))
                        }
                    }
                };
            }
            best.expect("non-empty spectrum").0
        }
    };
    let lambda = eigs[chosen];
    let kappa = eigs
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != chosen)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max);
    let separation = lambda.norm() - kappa;
    if separation < MIN_SEPARATION {
        return Err(Error::BranchCollision { zeta: zeta.to_vec(), separation });
    }
    let (mut right, left) = linalg::eigenvector_pair(m, lambda);
    // Fix the phase of r so it varies continuously along the path.
    if let Some(p) = prev {
        let c = right.dotc(&p.right);
        if c.norm() > 0.0 {
            right *= c.conj() / c.norm();
        }
    }
    Ok(BranchPoint { zeta: zeta.to_vec(), lambda, right, left, kappa, separation })
}

/// Continues the branch from 0 along a straight segment to `zeta`.
pub fn branch_at(spec: &MapSpec, zeta: &[f64]) -> Result<BranchPoint> {
    check_zeta(zeta, spec.dim())?;
    let len = zeta.iter().map(|z| z * z).sum::<f64>().sqrt();
    let steps = ((len / 0.05).ceil() as usize).max(1);
    let origin = vec![0.0; zeta.len()];
    let mut point = select_branch(&spec.fourier_matrix(&origin), &origin, None)?;
    for k in 1..=steps {
        let z: Vec<f64> = zeta.iter().map(|c| c * k as f64 / steps as f64).collect();
        point = select_branch(&spec.fourier_matrix(&z), &z, Some(&point))?;
    }
    Ok(point)
}

/// The branch on a grid containing 0. Points are visited by increasing
/// distance from 0, each continued from its nearest visited neighbor.
pub fn branch_on_grid(spec: &MapSpec, grid: &[Vec<f64>]) -> Result<Vec<BranchPoint>> {
    let norm = |z: &[f64]| z.iter().map(|c| c * c).sum::<f64>().sqrt();
    let origin = grid
        .iter()
        .position(|z| norm(z) == 0.0)
        .ok_or_else(|| Error::InvalidParameter("grid must contain zeta = 0".into()))?;
    for z in grid {
        check_zeta(z, spec.dim())?;
    }
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| norm(&grid[a]).total_cmp(&norm(&grid[b])).then(a.cmp(&b)));
    let mut out: Vec<Option<BranchPoint>> = vec![None; grid.len()];
    out[origin] = Some(select_branch(&spec.fourier_matrix(&grid[origin]), &grid[origin], None)?);
    let mut visited = vec![origin];
    for &i in order.iter().filter(|&&i| i != origin) {
        let dist = |j: usize| {
            grid[i].iter().zip(&grid[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        };
        let &nearest = visited
            .iter()
            .min_by(|&&a, &&b| dist(a).total_cmp(&dist(b)))
            .expect("origin visited");
        let prev = out[nearest].clone();
        out[i] = Some(select_branch(&spec.fourier_matrix(&grid[i]), &grid[i], prev.as_ref())?);
        visited.push(i);
    }
    Ok(out.into_iter().map(|p| p.expect("every point visited")).collect())
}

#[derive(Debug, Clone)]
pub struct Derivatives {
    pub grad: Vec<Complex64>,
    pub hess: Vec<Vec<Complex64>>,
    /// `λ⁽³⁾(0)`, for `d = 1` only.
    pub third: Option<Complex64>,
}

/// Ridders extrapolation of a difference quotient `D(h)` with error
/// `O(h²)`: halve `h` from `h0`, run the Neville tableau in `h²`, and keep the
/// entry with the smallest error estimate. Every level is visited: coarse
/// steps outside the disk where `λ` is smooth would otherwise trigger an early
/// stop. Leading steps where `D` fails (no branch that far out) are skipped.
fn ridders(d: &dyn Fn(f64) -> Result<Complex64>, h0: f64) -> Result<Complex64> {
    let mut h = h0;
    let mut first = None;
    for _ in 0..RIDDERS_LEVELS {
        if let Ok(v) = d(h) {
            first = Some(v);
            break;
        }
        h /= 2.0;
    }
    let Some(first) = first else {
        return Err(Error::InvalidParameter("no finite-difference step keeps the branch defined".into()));
    };
    let mut prev_row = vec![first];
    let (mut best, mut err) = (first, f64::INFINITY);
    for _ in 1..RIDDERS_LEVELS {
        h /= 2.0;
        let mut row = vec![d(h)?];
        let mut fac = 4.0;
        for j in 1..=prev_row.len() {
            let v = row[j - 1] + (row[j - 1] - prev_row[j - 1]) / (fac - 1.0);
            fac *= 4.0;
            let e = (v - row[j - 1]).norm().max((v - prev_row[j - 1]).norm());
            if e <= err {
                err = e;
                best = v;
            }
            row.push(v);
        }
        prev_row = row;
    }
    Ok(best)
}

/// Initial step and number of halvings for [`ridders`].
pub const RIDDERS_START: f64 = 0.1;
pub const RIDDERS_LEVELS: usize = 12;

/// Central differences of `λ` at 0, extrapolated by Ridders' method.
pub fn derivatives_at_zero(spec: &MapSpec, order: usize) -> Result<Derivatives> {
    let d = spec.dim();
    let unit = |a: usize, s: f64| {
        let mut z = vec![0.0; d];
        z[a] = s;
        z
    };
    let pair = |a: usize, sa: f64, b: usize, sb: f64| {
        let mut z = vec![0.0; d];
        z[a] += sa;
        z[b] += sb;
        z
    };
    let lam = |z: &[f64]| -> Result<Complex64> { Ok(branch_at(spec, z)?.lambda) };
    let l0 = lam(&vec![0.0; d])?;
    let grad = (0..d)
        .map(|a| ridders(&|h| Ok((lam(&unit(a, h))? - lam(&unit(a, -h))?) / (2.0 * h)), RIDDERS_START))
        .collect::<Result<Vec<_>>>()?;
    let mut hess = vec![vec![Complex64::new(0.0, 0.0); d]; d];
    if order >= 2 {
        #[allow(clippy::needless_range_loop)]
        for a in 0..d {
            hess[a][a] =
                ridders(&|h| Ok((lam(&unit(a, h))? - 2.0 * l0 + lam(&unit(a, -h))?) / (h * h)), RIDDERS_START)?;
            for b in 0..a {
                let v = ridders(
                    &|h| {
                        Ok((lam(&pair(a, h, b, h))? - lam(&pair(a, h, b, -h))? - lam(&pair(a, -h, b, h))?
                            + lam(&pair(a, -h, b, -h))?)
                            / (4.0 * h * h))
                    },
                    RIDDERS_START,
                )?;
                hess[a][b] = v;
                hess[b][a] = v;
            }
        }
    }
    let third = if order >= 3 && d == 1 {
        Some(ridders(
            &|h| {
                Ok((lam(&[2.0 * h])? - 2.0 * lam(&[h])? + 2.0 * lam(&[-h])? - lam(&[-2.0 * h])?)
                    / (2.0 * h.powi(3)))
            },
            RIDDERS_START,
        )?)
    } else {
        None
    };
    Ok(Derivatives { grad, hess, third })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchSample {
    pub zeta: Vec<f64>,
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub modulus: f64,
    pub kappa: f64,
    pub separation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub d: usize,
    pub branch: Vec<BranchSample>,
    /// `κ̂`: largest non-dominant eigenvalue modulus over the grid.
    pub kappa_hat: f64,
    pub grad_lambda: Vec<[f64; 2]>,
    pub hess_lambda: Vec<Vec<[f64; 2]>>,
    pub third_derivative: Option<[f64; 2]>,
    /// `Σ = −Hess λ(0)` (real part).
    pub sigma: Vec<Vec<f64>>,
    pub sigma2: Option<f64>,
    /// `i λ⁽³⁾(0)` (real part).
    pub mu3_fourier: Option<f64>,
}

fn pair_of(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// Branch values on `grid` plus derivatives at 0.
pub fn lambda_branch(spec: &MapSpec, grid: &[Vec<f64>]) -> Result<SpectralSummary> {
    let points = branch_on_grid(spec, grid)?;
    let kappa_hat = points.iter().map(|p| p.kappa).fold(0.0, f64::max);
    let derivs = derivatives_at_zero(spec, 3)?;
    let d = spec.dim();
    let sigma: Vec<Vec<f64>> = derivs.hess.iter().map(|r| r.iter().map(|z| -z.re).collect()).collect();
    Ok(SpectralSummary {
        d,
        branch: points
            .iter()
            .map(|p| BranchSample {
                zeta: p.zeta.clone(),
                lambda_re: p.lambda.re,
                lambda_im: p.lambda.im,
                modulus: p.lambda.norm(),
                kappa: p.kappa,
                separation: p.separation,
            })
            .collect(),
        kappa_hat,
        grad_lambda: derivs.grad.iter().cloned().map(pair_of).collect(),
        hess_lambda: derivs.hess.iter().map(|r| r.iter().cloned().map(pair_of).collect()).collect(),
        third_derivative: derivs.third.map(pair_of),
        sigma2: (d == 1).then(|| sigma[0][0]),
        sigma,
        mu3_fourier: derivs.third.map(|t| (Complex64::i() * t).re),
    })
}

/// Symmetric one-dimensional grid `{−zmax, …, zmax}` with `2m + 1` points.
pub fn symmetric_grid(zmax: f64, m: usize) -> Vec<Vec<f64>> {
    (0..=2 * m).map(|k| vec![zmax * (k as f64 - m as f64) / m.max(1) as f64]).collect()
}

#[derive(Debug, Clone)]
pub struct ExpansionEvaluation {
    pub zeta: Vec<f64>,
    pub n: usize,
    pub lhs: Complex64,
    pub rhs_main: Complex64,
    pub rhs_rem: Complex64,
    pub lambda: Complex64,
    pub kappa_hat: f64,
    /// `C` with `|R_n(ζ, f)| ≤ C κ̂ⁿ ‖f‖₂`, namely `‖N(ζ)ⁿ‖₂ / κ̂ⁿ`.
    pub remainder_constant: f64,
}

/// `E_{π,0}[e^{i⟨ζ,Y_n⟩} f(X_n)] = λ(ζ)ⁿ L(ζ, f) + R_n(ζ, f)`, each side
/// computed separately.
pub fn evaluate_expansion(spec: &MapSpec, zeta: &[f64], n: usize, f: &[f64]) -> Result<ExpansionEvaluation> {
    let s = spec.size();
    if f.len() != s {
        return Err(Error::DimensionMismatch("f has the wrong length".into()));
    }
    let pi = spec.kernel().pi();
    let m = spec.fourier_matrix(zeta);
    let point = branch_at(spec, zeta)?;
    let proj = point.projection();
    let fv = CVector::from_fn(s, |i, _| Complex64::new(f[i], 0.0));
    let pi_dot = |v: &CVector| -> Complex64 { v.iter().zip(pi).map(|(z, &w)| z * w).sum() };

    let mut g = fv.clone();
    for _ in 0..n {
        g = &m * g;
    }
    let lhs = pi_dot(&g);
    let rhs_main = point.lambda.powu(n as u32) * pi_dot(&(&proj * &fv));
    let nmat = &m * (CMatrix::identity(s, s) - &proj);
    let n_pow = linalg::mat_pow(&nmat, n as u64);
    let rhs_rem = pi_dot(&(&n_pow * &fv));
    let n_norm = chain::l2_operator_norm(&n_pow, pi)?;
    let remainder_constant = if point.kappa > 0.0 { n_norm / point.kappa.powi(n as i32) } else { n_norm };
    Ok(ExpansionEvaluation {
        zeta: zeta.to_vec(),
        n,
        lhs,
        rhs_main,
        rhs_rem,
        lambda: point.lambda,
        kappa_hat: point.kappa,
        remainder_constant,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonlatticeScan {
    pub rho_hat: f64,
    pub worst_zeta: Vec<f64>,
    pub nonlattice: bool,
}

/// Largest spectral radius of `S₁(ζ)` over a grid excluding 0.
pub fn nonlattice_scan(spec: &MapSpec, grid: &[Vec<f64>]) -> Result<NonlatticeScan> {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for z in grid {
        check_zeta(z, spec.dim())?;
        if z.iter().all(|&c| c == 0.0) {
            return Err(Error::InvalidParameter("scan grid must exclude zeta = 0".into()));
        }
        let radius = linalg::eigenvalues(&spec.fourier_matrix(z)).iter().map(|e| e.norm()).fold(0.0, f64::max);
        if radius > best.0 {
            best = (radius, z.clone());
        }
    }
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty scan grid".into()));
    }
    Ok(NonlatticeScan { rho_hat: best.0, worst_zeta: best.1, nonlattice: best.0 < 1.0 - 1e-8 })
}

/// Evenly spaced scalar grid on `[a, b]`.
pub fn interval_grid(a: f64, b: f64, points: usize) -> Vec<Vec<f64>> {
    (0..points).map(|k| vec![a + (b - a) * k as f64 / (points - 1).max(1) as f64]).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContourCheck {
    pub kappa: f64,
    /// `‖Π_contour − Π_eig‖₂`.
    pub projection_residual: f64,
    /// `‖N_contour(ζ)ⁿ − N_eig(ζ)ⁿ‖₂`.
    pub remainder_residual: f64,
}

/// `(1/2πi) ∮ g(z) (z − M)⁻¹ dz` over a circle, by the trapezoid rule.
fn contour_integral(m: &CMatrix, center: f64, radius: f64, nodes: usize, g: impl Fn(Complex64) -> Complex64) -> Result<CMatrix> {
    let s = m.nrows();
    let eigs = linalg::eigenvalues(m);
    let distance = eigs
        .iter()
        .map(|e| ((e - center).norm() - radius).abs())
        .fold(f64::INFINITY, f64::min);
    if distance < CONTOUR_CLEARANCE {
        return Err(Error::SingularResolvent { distance });
    }
    let mut acc = CMatrix::zeros(s, s);
    for k in 0..nodes {
        let w = Complex64::from_polar(radius, 2.0 * PI * k as f64 / nodes as f64);
        let z = w + center;
        let resolvent = (CMatrix::identity(s, s) * z - m)
            .try_inverse()
            .ok_or(Error::SingularResolvent { distance })?;
        acc += resolvent * (g(z) * w);
    }
    Ok(acc / Complex64::new(nodes as f64, 0.0))
}

/// Recomputes `Π(ζ)` over `Γ₁` (center 1, radius `1 − κ`) and `N(ζ)ⁿ` over
/// `Γ₀` (center 0, radius `κ`) and compares with the eigendecomposition.
///
/// Without an explicit `kappa`, uses `(e^{−ε} + 1)/2` from the mixing-rate
/// fit when it separates the spectrum, else `(κ̂ + |λ|)/2`.
pub fn contour_crosscheck(spec: &MapSpec, zeta: &[f64], n: usize, kappa: Option<f64>) -> Result<ContourCheck> {
    let point = branch_at(spec, zeta)?;
    let lam = point.lambda.norm();
    let kappa = match kappa {
        Some(k) => k,
        None => {
            let fitted = spectral_gap_report(spec.kernel(), 32)?
                .epsilon
                .map(|eps| ((-eps).exp() + 1.0) / 2.0)
                .filter(|&k| k > point.kappa + CONTOUR_CLEARANCE && k < lam - CONTOUR_CLEARANCE && (point.lambda - 1.0).norm() < 1.0 - k);
            fitted.unwrap_or((point.kappa + lam) / 2.0)
        }
    };
    let m = spec.fourier_matrix(zeta);
    let s = m.nrows();
    // Near-coincidence is reported by the resolvent check as SingularResolvent.
    if (point.lambda - 1.0).norm() > 1.0 - kappa + CONTOUR_CLEARANCE {
        return Err(Error::InvalidParameter(format!(
            "lambda = {} lies outside the circle of radius {} around 1",
            point.lambda,
            1.0 - kappa
        )));
    }
    let proj_eig = point.projection();
    let proj_contour = contour_integral(&m, 1.0, 1.0 - kappa, CONTOUR_NODES, |_| Complex64::new(1.0, 0.0))?;
    let rem_eig = linalg::mat_pow(&(&m * (CMatrix::identity(s, s) - &proj_eig)), n as u64);
    let rem_contour = contour_integral(&m, 0.0, kappa, CONTOUR_NODES, |z| z.powu(n as u32))?;
    let pi = spec.kernel().pi();
    Ok(ContourCheck {
        kappa,
        projection_residual: chain::l2_operator_norm(&(proj_contour - proj_eig), pi)?,
        remainder_residual: chain::l2_operator_norm(&(rem_contour - rem_eig), pi)?,
    })
}

/// Midpoint step and cut-off of the inversion integral.
const INVERSION_STEP: f64 = 0.02;
const INVERSION_FLOOR: f64 = 1e-14;
const INVERSION_WINDOW: f64 = 10.0;
const INVERSION_MAX_U: f64 = 2000.0;

/// Distribution function of `Y_n / (σ√n)` under `P_{μ,0}` at the points
/// `xs`, by Gil–Pelaez inversion of `u ↦ μ S₁(u/(σ√n))ⁿ 1`.
///
/// Only meaningful for nonlattice models; at atoms it returns the midpoint
/// of the jump.
pub fn cdf_by_inversion(spec: &MapSpec, mu: &[f64], n: usize, sigma: f64, xs: &[f64]) -> Result<Vec<f64>> {
    if spec.dim() != 1 {
        return Err(Error::DimensionMismatch("inversion requires d = 1".into()));
    }
    crate::model::check_initial(spec.kernel(), mu)?;
    let scale = sigma * (n as f64).sqrt();
    let s = spec.size();
    let ones = CVector::from_element(s, Complex64::new(1.0, 0.0));
    let mut phis: Vec<(f64, Complex64)> = Vec::new();
    let mut quiet = 0.0;
    let mut k = 0usize;
    loop {
        let u = (k as f64 + 0.5) * INVERSION_STEP;
        let v = linalg::mat_pow(&spec.fourier_matrix(&[u / scale]), n as u64) * &ones;
        let phi: Complex64 = v.iter().zip(mu).map(|(z, &w)| z * w).sum();
        phis.push((u, phi));
        quiet = if phi.norm() < INVERSION_FLOOR { quiet + INVERSION_STEP } else { 0.0 };
        if quiet >= INVERSION_WINDOW || u > INVERSION_MAX_U {
            break;
        }
        k += 1;
    }
    Ok(xs
        .iter()
        .map(|&x| {
            let integral: f64 = phis
                .iter()
                .map(|&(u, phi)| (Complex64::from_polar(1.0, -u * x) * phi).im / u)
                .sum::<f64>()
                * INVERSION_STEP;
            0.5 - integral / PI
        })
        .collect())
}
