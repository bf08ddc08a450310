//! Finite-state Markov kernels, their stationary law and the `L²(π)` geometry.
//!
//! A [`StochasticKernel`] is validated at construction: rows must be
//! probability vectors and there must be exactly one closed communicating
//! class, so the stationary law `π` is unique. States with `π(x) = 0` are
//! transient; every `L²(π)` computation works on the quotient space obtained
//! by dropping them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

const ROW_SUM_TOL: f64 = 1e-12;
const STATIONARY_RESIDUAL: f64 = 1e-10;
const PI_CROSSCHECK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticKernel {
    states: Vec<String>,
    p: DMatrix<f64>,
    pi: Vec<f64>,
}

impl StochasticKernel {
    pub fn new(states: Vec<String>, p: DMatrix<f64>) -> Result<Self> {
        if states.len() != p.nrows() || p.nrows() != p.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for a {}x{} matrix",
                states.len(),
                p.nrows(),
                p.ncols()
            )));
        }
        let p = validate_stochastic(p)?;
        let pi = solve_stationary(&p)?;
        Ok(Self { states, p, pi })
    }

    /// Kernel with labels `0..S`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = matrix_from_rows(rows)?;
        let states = (0..p.nrows()).map(|i| i.to_string()).collect();
        Self::new(states, p)
    }

    /// Like [`new`](Self::new) but cross-checks a caller-supplied `π`.
    pub fn with_stationary(states: Vec<String>, p: DMatrix<f64>, pi: &[f64]) -> Result<Self> {
        let k = Self::new(states, p)?;
        if pi.len() != k.size() {
            return Err(Error::DimensionMismatch(format!(
                "pi has {} entries for {} states",
                pi.len(),
                k.size()
            )));
        }
        let max_diff = k
            .pi
            .iter()
            .zip(pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if max_diff > PI_CROSSCHECK_TOL {
            return Err(Error::StationaryMismatch { max_diff });
        }
        Ok(k)
    }

    pub fn size(&self) -> usize {
        self.p.nrows()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// `Π`, the matrix whose rows all equal `π` (so `Π f = π(f) 1`).
    pub fn projection(&self) -> DMatrix<f64> {
        let n = self.size();
        DMatrix::from_fn(n, n, |_, j| self.pi[j])
    }

    /// Indices of states with positive stationary mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.size()).filter(|&i| self.pi[i] > 0.0).collect()
    }

    pub fn has_full_support(&self) -> bool {
        self.pi.iter().all(|&p| p > 0.0)
    }

    /// The kernel restricted to the support of `π`, with the index map back
    /// to the original states.
    pub fn restricted(&self) -> (DMatrix<f64>, Vec<f64>, Vec<usize>) {
        let idx = self.support();
        let m = idx.len();
        let p = DMatrix::from_fn(m, m, |i, j| self.p[(idx[i], idx[j])]);
        let pi = idx.iter().map(|&i| self.pi[i]).collect();
        (p, pi, idx)
    }

    pub fn geometry(&self) -> L2Geometry<'_> {
        L2Geometry { pi: &self.pi }
    }

    /// `‖(P − Π)^m‖₂` for `m = 0..=max_power` on the support of `π`.
    pub fn centered_power_norms(&self, max_power: usize) -> Vec<f64> {
        let (p, pi, _) = self.restricted();
        let m = p.nrows();
        let proj = DMatrix::from_fn(m, m, |_, j| pi[j]);
        let centered = linalg::to_complex(&(p - &proj));
        let ident = CMatrix::identity(m, m);
        let mut out = Vec::with_capacity(max_power + 1);
        let mut acc = ident.clone();
        // (P − Π)^0 = I acts on L²(π); on centered functions it is I − Π.
        let i_minus_proj = ident - linalg::to_complex(&proj);
        out.push(linalg::weighted_spectral_norm(&i_minus_proj, &pi));
        for _ in 1..=max_power {
            acc = &acc * &centered;
            out.push(linalg::weighted_spectral_norm(&acc, &pi));
        }
        out
    }

    /// A block length `m` with `‖(P − Π)^m‖₂ < 1`, used to bound tails of
    /// series `Σ_j (P − Π)^j`.
    pub fn contraction_witness(&self, max_block: usize) -> Result<ContractionWitness> {
        let norms = self.centered_power_norms(max_block);
        for (m, &b) in norms.iter().enumerate().skip(1) {
            if b < 1.0 - 1e-12 {
                let prefix = norms[..m].iter().cloned().fold(1.0, f64::max);
                return Ok(ContractionWitness { block: m, contraction: b, prefix_max: prefix });
            }
        }
        Err(Error::GapAbsent)
    }
}

/// `‖(P − Π)^m‖₂ ≤ contraction < 1` with `m = block`, and
/// `‖(P − Π)^r‖₂ ≤ prefix_max` for `r < block`.
#[derive(Debug, Clone, Copy)]
pub struct ContractionWitness {
    pub block: usize,
    pub contraction: f64,
    pub prefix_max: f64,
}

impl ContractionWitness {
    /// Upper bound on `Σ_{j ≥ start} ‖(P − Π)^j‖₂`.
    pub fn tail_bound(&self, start: usize) -> f64 {
        let m = self.block as f64;
        let blocks = (start / self.block) as i32;
        self.prefix_max * m * self.contraction.powi(blocks) / (1.0 - self.contraction)
    }
}

/// Weighted inner product `⟨f, g⟩ = Σ π(x) f(x) conj(g(x))`.
#[derive(Debug, Clone, Copy)]
pub struct L2Geometry<'a> {
    pi: &'a [f64],
}

impl<'a> L2Geometry<'a> {
    pub fn new(pi: &'a [f64]) -> Self {
        Self { pi }
    }

    pub fn inner(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        self.pi
            .iter()
            .zip(f.iter().zip(g))
            .map(|(&w, (a, b))| a * b.conj() * w)
            .sum()
    }

    pub fn norm(&self, f: &[Complex64]) -> f64 {
        self.inner(f, f).re.max(0.0).sqrt()
    }

    pub fn norm_real(&self, f: &[f64]) -> f64 {
        self.pi.iter().zip(f).map(|(w, x)| w * x * x).sum::<f64>().sqrt()
    }
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::DimensionMismatch("empty matrix".into()));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "row {bad} has {} entries, expected {n}",
            rows[bad].len()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn validate_stochastic(mut p: DMatrix<f64>) -> Result<DMatrix<f64>> {
    for i in 0..p.nrows() {
        let row = p.row(i);
        let sum: f64 = row.iter().sum();
        let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
        if !sum.is_finite() || (sum - 1.0).abs() > ROW_SUM_TOL || min < -1e-15 {
            return Err(Error::NotStochastic { row: i, sum, min });
        }
    }
    // Round-off negatives from matrix exponentials are clamped.
    p.iter_mut().for_each(|x| {
        if *x < 0.0 {
            *x = 0.0
        }
    });
    Ok(p)
}

/// Strongly connected components of the support graph of `p`, in an
/// arbitrary order.
fn strongly_connected_components(p: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = p.nrows();
    let succ: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).filter(|&j| p[(i, j)] > 0.0).collect()).collect();
    let pred: Vec<Vec<usize>> =
        (0..n).map(|j| (0..n).filter(|&i| p[(i, j)] > 0.0).collect()).collect();

    // Kosaraju, iteratively.
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if visited[root] {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        visited[root] = true;
        while let Some((v, next)) = stack.pop() {
            if next < succ[v].len() {
                stack.push((v, next + 1));
                let w = succ[v][next];
                if !visited[w] {
                    visited[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut components = Vec::new();
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![root];
        comp[root] = id;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for &w in &pred[v] {
                if comp[w] == usize::MAX {
                    comp[w] = id;
                    members.push(w);
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

/// Closed communicating classes: components with no edge leaving them.
pub fn closed_classes(p: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let comps = strongly_connected_components(p);
    comps
        .into_iter()
        .filter(|c| {
            c.iter().all(|&i| (0..p.ncols()).all(|j| p[(i, j)] == 0.0 || c.binary_search(&j).is_ok()))
        })
        .collect()
}

/// Stationary law of a row-stochastic matrix by a direct linear solve of
/// `(Pᵀ − I) π = 0` with one equation replaced by `Σ π = 1`.
pub fn solve_stationary(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let p = validate_stochastic(p.clone())?;
    let n = p.nrows();
    let classes = closed_classes(&p);
    if classes.len() != 1 {
        return Err(Error::NonIrreducible { classes: classes.len() });
    }
    let class = &classes[0];
    let m = class.len();
    let sub = DMatrix::from_fn(m, m, |i, j| p[(class[i], class[j])]);

    let mut a = sub.transpose() - DMatrix::identity(m, m);
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(m);
    rhs[m - 1] = 1.0;
    let lu = a.clone().lu();
    let mut x = lu.solve(&rhs).ok_or(Error::NonIrreducible { classes: 0 })?;
    // One step of iterative refinement.
    let r = &rhs - &a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    x.iter_mut().for_each(|v| *v = v.max(0.0));
    let total: f64 = x.iter().sum();
    x /= total;

    let mut pi = vec![0.0; n];
    for (k, &i) in class.iter().enumerate() {
        pi[i] = x[k];
    }
    let residual = stationary_residual(&p, &pi);
    if residual > STATIONARY_RESIDUAL {
        return Err(Error::NonIrreducible { classes: 1 });
    }
    Ok(pi)
}

/// `max_j |(πP)_j − π_j|`.
pub fn stationary_residual(p: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let n = pi.len();
    (0..n)
        .map(|j| {
            let s: f64 = (0..n).map(|i| pi[i] * p[(i, j)]).sum();
            (s - pi[j]).abs()
        })
        .fold(0.0, f64::max)
}

/// Operator norm of `a` on `L²(π)`, computed on the quotient by zero-mass
/// states.
pub fn l2_operator_norm(a: &CMatrix, pi: &[f64]) -> Result<f64> {
    let n = pi.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, pi has {n} entries",
            a.nrows(),
            a.ncols()
        )));
    }
    let support: Vec<usize> = (0..n).filter(|&i| pi[i] > 0.0).collect();
    for x in (0..n).filter(|&x| pi[x] == 0.0) {
        if support.iter().any(|&y| a[(y, x)].norm() != 0.0) {
            return Err(Error::ZeroMassState { state: x });
        }
    }
    let m = support.len();
    let sub = CMatrix::from_fn(m, m, |i, j| a[(support[i], support[j])]);
    let w: Vec<f64> = support.iter().map(|&i| pi[i]).collect();
    Ok(linalg::weighted_spectral_norm(&sub, &w))
}

pub fn l2_operator_norm_real(a: &DMatrix<f64>, pi: &[f64]) -> Result<f64> {
    l2_operator_norm(&linalg::to_complex(a), pi)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixingBound {
    pub t: usize,
    pub bound: f64,
}

/// `‖P^{t−1} − Π‖₂` for `t = 1..=t_max` with an exponential rate fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixingBoundTable {
    pub bounds: Vec<MixingBound>,
    /// Least-squares intercept of `ln bound` against `t`, over `t ≥ 2`.
    pub log_c_fit: Option<f64>,
    /// Decay rate `ε` of the fit; `None` when every bound past `t = 1`
    /// vanishes (the i.i.d. case) or too few points survive.
    pub epsilon: Option<f64>,
    /// Smallest `C` with `bound(t) ≤ C e^{−εt}` on the computed range.
    pub c_envelope: Option<f64>,
    pub gap_present: bool,
}

impl MixingBoundTable {
    pub fn bound(&self, t: usize) -> Option<f64> {
        self.bounds.get(t.checked_sub(1)?).map(|b| b.bound)
    }
}

/// Below this a bound is treated as an exact zero for fitting purposes.
const FIT_FLOOR: f64 = 1e-13;

pub fn spectral_gap_report(kernel: &StochasticKernel, t_max: usize) -> Result<MixingBoundTable> {
    if t_max < 2 {
        return Err(Error::InvalidParameter(format!("t_max must be >= 2, got {t_max}")));
    }
    let norms = kernel.centered_power_norms(t_max - 1);
    let bounds: Vec<MixingBound> =
        norms.iter().enumerate().map(|(m, &b)| MixingBound { t: m + 1, bound: b }).collect();

    let pts: Vec<(f64, f64)> = bounds
        .iter()
        .filter(|b| b.t >= 2 && b.bound > FIT_FLOOR)
        .map(|b| (b.t as f64, b.bound.ln()))
        .collect();
    let (log_c_fit, epsilon) = if pts.len() >= 2 {
        let (slope, intercept) = least_squares_line(&pts);
        (Some(intercept), Some(-slope))
    } else {
        (None, None)
    };
    let c_envelope = epsilon.map(|eps| {
        bounds
            .iter()
            .filter(|b| b.t >= 2)
            .map(|b| b.bound * (eps * b.t as f64).exp())
            .fold(0.0, f64::max)
    });
    let gap_present = bounds.iter().any(|b| b.bound < 1.0 - 1e-12);
    Ok(MixingBoundTable { bounds, log_c_fit, epsilon, c_envelope, gap_present })
}

/// Returns `(slope, intercept)`.
pub(crate) fn least_squares_line(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Interpolation bound `min(a^α b^{1−α}, 2 min(a^α, b^{1−α}))` between the
/// norms of `P_t − Π` on two `L^p` spaces.
pub fn interpolation_bound(norm_p1: f64, norm_p2: f64, alpha: f64) -> f64 {
    let a = norm_p1.powf(alpha);
    let b = norm_p2.powf(1.0 - alpha);
    (a * b).min(2.0 * a.min(b))
}

/// Detailed balance: `diag(π) P` symmetric within `1e−12`.
pub fn check_reversible(kernel: &StochasticKernel) -> bool {
    let p = kernel.matrix();
    let pi = kernel.pi();
    let n = kernel.size();
    (0..n).all(|i| (0..i).all(|j| (pi[i] * p[(i, j)] - pi[j] * p[(j, i)]).abs() <= 1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_state() -> StochasticKernel {
        StochasticKernel::from_rows(&[vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap()
    }

    #[test]
    fn stationary_examples() {
        let k = StochasticKernel::from_rows(&[vec![1.0]]).unwrap();
        assert_eq!(k.pi(), &[1.0]);

        let k = two_state();
        // Balance: π0·0.3 = π1·0.2.
        assert!((k.pi()[0] - 0.4).abs() < 1e-14);
        assert!((k.pi()[1] - 0.6).abs() < 1e-14);

        let k = StochasticKernel::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((k.pi()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn stationary_errors() {
        let err = StochasticKernel::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::NonIrreducible { classes: 2 }));
        let err = StochasticKernel::from_rows(&[vec![0.5, 0.6], vec![0.5, 0.5]]).unwrap_err();
        assert!(matches!(err, Error::NotStochastic { row: 0, .. }));
        let err = StochasticKernel::from_rows(&[vec![1.2, -0.2], vec![0.5, 0.5]]).unwrap_err();
        assert!(matches!(err, Error::NotStochastic { row: 0, .. }));
    }

    #[test]
    fn transient_states_get_zero_mass() {
        let k = StochasticKernel::from_rows(&[
            vec![0.5, 0.5, 0.0],
            vec![0.0, 0.3, 0.7],
            vec![0.0, 0.6, 0.4],
        ])
        .unwrap();
        assert_eq!(k.pi()[0], 0.0);
        assert_eq!(k.support(), vec![1, 2]);
        assert!(stationary_residual(k.matrix(), k.pi()) < 1e-12);
    }

    #[test]
    fn stationary_crosscheck() {
        let p = matrix_from_rows(&[vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let labels = vec!["a".to_string(), "b".to_string()];
        assert!(StochasticKernel::with_stationary(labels.clone(), p.clone(), &[0.4, 0.6]).is_ok());
        let err = StochasticKernel::with_stationary(labels, p, &[0.5, 0.5]).unwrap_err();
        assert!(matches!(err, Error::StationaryMismatch { .. }));
    }

    /// Norm oracle: for a reversible chain `D^{1/2} A D^{-1/2}` is symmetric,
    /// so the norm is the largest |eigenvalue| of that symmetric matrix.
    fn symmetric_oracle(a: &DMatrix<f64>, pi: &[f64]) -> f64 {
        let n = pi.len();
        let b = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * (pi[i] / pi[j]).sqrt());
        let sym = (&b + b.transpose()) * 0.5;
        sym.symmetric_eigen().eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    #[test]
    fn operator_norm_examples() {
        let k = two_state();
        let proj = k.projection();
        assert!((l2_operator_norm_real(&proj, k.pi()).unwrap() - 1.0).abs() < 1e-12);
        let centered = k.matrix() - &proj;
        let nrm = l2_operator_norm_real(&centered, k.pi()).unwrap();
        assert!((nrm - 0.5).abs() < 1e-12);
        assert!((nrm - symmetric_oracle(&centered, k.pi())).abs() < 1e-12);
        let zero = DMatrix::zeros(2, 2);
        assert_eq!(l2_operator_norm_real(&zero, k.pi()).unwrap(), 0.0);
    }

    #[test]
    fn operator_norm_rejects_zero_mass_action() {
        let pi = [0.0, 1.0];
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(
            l2_operator_norm_real(&a, &pi),
            Err(Error::ZeroMassState { state: 0 })
        ));
    }

    #[test]
    fn gap_report_two_state() {
        let table = spectral_gap_report(&two_state(), 5).unwrap();
        let expected = [1.0, 0.5, 0.25, 0.125, 0.0625];
        for (b, e) in table.bounds.iter().zip(expected) {
            assert!((b.bound - e).abs() < 1e-12, "{b:?}");
        }
        assert!((table.epsilon.unwrap() - 2f64.ln()).abs() < 1e-10);
        assert!(table.gap_present);
        let c = table.c_envelope.unwrap();
        let eps = table.epsilon.unwrap();
        for b in &table.bounds[1..] {
            assert!(b.bound <= c * (-eps * b.t as f64).exp() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn gap_report_iid_and_periodic() {
        let iid = StochasticKernel::from_rows(&[vec![0.4, 0.6], vec![0.4, 0.6]]).unwrap();
        let table = spectral_gap_report(&iid, 6).unwrap();
        assert!((table.bounds[0].bound - 1.0).abs() < 1e-12);
        assert!(table.bounds[1..].iter().all(|b| b.bound < 1e-14));
        assert!(table.gap_present);

        let periodic = StochasticKernel::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let table = spectral_gap_report(&periodic, 6).unwrap();
        assert!(table.bounds.iter().all(|b| (b.bound - 1.0).abs() < 1e-12));
        assert!(!table.gap_present);
        assert!(periodic.contraction_witness(32).is_err());

        assert!(spectral_gap_report(&iid, 1).is_err());
    }

    #[test]
    fn interpolation_examples() {
        assert!((interpolation_bound(0.25, 1.0, 0.5) - 0.5).abs() < 1e-15);
        assert!((interpolation_bound(0.3, 0.3, 0.7) - 0.3).abs() < 1e-15);
        assert_eq!(interpolation_bound(0.0, 1.0, 0.5), 0.0);
    }

    #[test]
    fn reversibility_examples() {
        assert!(check_reversible(&two_state()));
        let cycle = StochasticKernel::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        assert!(!check_reversible(&cycle));
        let bd = StochasticKernel::from_rows(&[
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.3, 0.2, 0.5, 0.0],
            vec![0.0, 0.4, 0.1, 0.5],
            vec![0.0, 0.0, 0.6, 0.4],
        ])
        .unwrap();
        assert!(check_reversible(&bd));
    }

    fn kernel_strategy() -> impl Strategy<Value = StochasticKernel> {
        (2usize..6).prop_flat_map(|n| {
            proptest::collection::vec(proptest::collection::vec(0.05f64..1.0, n), n).prop_map(
                |rows| {
                    let rows: Vec<Vec<f64>> = rows
                        .into_iter()
                        .map(|r| {
                            let s: f64 = r.iter().sum();
                            let mut r: Vec<f64> = r.iter().map(|x| x / s).collect();
                            // Force the row to sum to one exactly.
                            let head: f64 = r[1..].iter().sum();
                            r[0] = 1.0 - head;
                            r
                        })
                        .collect();
                    StochasticKernel::from_rows(&rows).unwrap()
                },
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn centered_powers_agree(k in kernel_strategy(), n in 1usize..6) {
            let proj = k.projection();
            let pn = k.matrix().pow(n as u32);
            let lhs = l2_operator_norm_real(&(pn - &proj), k.pi()).unwrap();
            let c = k.matrix() - &proj;
            let rhs = l2_operator_norm_real(&c.pow(n as u32), k.pi()).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn bounds_submultiplicative(k in kernel_strategy()) {
            let table = spectral_gap_report(&k, 8).unwrap();
            for m in 0..4 {
                for n in 0..4 {
                    let lhs = table.bound(m + n + 1).unwrap();
                    let rhs = table.bound(m + 1).unwrap() * table.bound(n + 1).unwrap();
                    prop_assert!(lhs <= rhs + 1e-10);
                }
            }
            for w in table.bounds.windows(2).skip(1) {
                prop_assert!(w[1].bound <= w[0].bound + 1e-10);
            }
        }

        #[test]
        fn reversible_norm_is_second_eigenvalue(rates in proptest::collection::vec(0.05f64..0.45, 3)) {
            // Birth-death chains are reversible.
            let (a, b, c) = (rates[0], rates[1], rates[2]);
            let k = StochasticKernel::from_rows(&[
                vec![1.0 - a, a, 0.0],
                vec![b, 1.0 - b - c, c],
                vec![0.0, a, 1.0 - a],
            ]).unwrap();
            prop_assert!(check_reversible(&k));
            let nrm = l2_operator_norm_real(&(k.matrix() - k.projection()), k.pi()).unwrap();
            let mut ev: Vec<f64> = linalg::eigenvalues(&linalg::to_complex(k.matrix()))
                .iter().map(|z| z.norm()).collect();
            ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
            prop_assert!((nrm - ev[1]).abs() < 1e-10);
        }

        #[test]
        fn interpolation_monotone(a in 0.0f64..2.0, b in 0.0f64..2.0, d in 0.0f64..0.5, alpha in 0.0f64..1.0) {
            prop_assert!(interpolation_bound(a, b, alpha) <= interpolation_bound(a + d, b, alpha) + 1e-15);
            prop_assert!(interpolation_bound(a, b, alpha) <= interpolation_bound(a, b + d, alpha) + 1e-15);
            prop_assert!((interpolation_bound(a, a, alpha) - a).abs() < 1e-12);
        }
    }
}
