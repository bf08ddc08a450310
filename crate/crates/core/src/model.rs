//! Discrete- and continuous-time Markov additive processes over a finite
//! driving chain, with exact moment oracles and lattice detection.
//!
//! A discrete-time model is a [`StochasticKernel`] plus one increment law per
//! supported edge, so that `Q̃₁(x; x′, dz) = P(x, x′) · law(x, x′)(dz)`. The
//! time-one skeleton of a continuous-time model is stored with its generator
//! instead: its per-edge laws are only known through `exp(G + iζ diag(ξ))`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{self, StochasticKernel};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

const MIXTURE_SUM_TOL: f64 = 1e-12;
const MAX_MOMENT_ORDER: usize = 4;

/// Law of `Y₁` given `(X₀, X₁) = (x, x′)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncrementLaw {
    Deterministic { value: Vec<f64> },
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    FiniteMixture { atoms: Vec<Atom> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub prob: f64,
    pub value: Vec<f64>,
}

impl IncrementLaw {
    pub fn deterministic(v: f64) -> Self {
        IncrementLaw::Deterministic { value: vec![v] }
    }

    pub fn gaussian(mean: f64, var: f64) -> Self {
        IncrementLaw::Gaussian { mean: vec![mean], cov: vec![vec![var]] }
    }

    pub fn mixture(atoms: &[(f64, f64)]) -> Self {
        IncrementLaw::FiniteMixture {
            atoms: atoms.iter().map(|&(prob, v)| Atom { prob, value: vec![v] }).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            IncrementLaw::Deterministic { value } => value.len(),
            IncrementLaw::Gaussian { mean, .. } => mean.len(),
            IncrementLaw::FiniteMixture { atoms } => atoms.first().map_or(0, |a| a.value.len()),
        }
    }

    fn validate(&self, d: usize, from: usize, to: usize) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidIncrement { from, to, reason });
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            IncrementLaw::Deterministic { value } => {
                if value.len() != d || !finite(value) {
                    return bad(format!("value must be {d} finite numbers"));
                }
            }
            IncrementLaw::Gaussian { mean, cov } => {
                if mean.len() != d || !finite(mean) {
                    return bad(format!("mean must be {d} finite numbers"));
                }
                if cov.len() != d || cov.iter().any(|r| r.len() != d || !finite(r)) {
                    return bad(format!("cov must be a finite {d}x{d} matrix"));
                }
                let c = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
                let scale = c.amax().max(1.0);
                if (&c - c.transpose()).amax() > 1e-12 * scale {
                    return bad("cov is not symmetric".into());
                }
                let min_eig = c.symmetric_eigen().eigenvalues.min();
                if min_eig < -1e-12 * scale {
                    return bad(format!("cov is not positive semidefinite (eigenvalue {min_eig:e})"));
                }
            }
            IncrementLaw::FiniteMixture { atoms } => {
                if atoms.is_empty() {
                    return bad("mixture has no atoms".into());
                }
                if atoms.iter().any(|a| a.value.len() != d || !finite(&a.value)) {
                    return bad(format!("atom values must be {d} finite numbers"));
                }
                if atoms.iter().any(|a| !(a.prob >= 0.0)) {
                    return bad("negative atom probability".into());
                }
                let s: f64 = atoms.iter().map(|a| a.prob).sum();
                if (s - 1.0).abs() > MIXTURE_SUM_TOL {
                    return bad(format!("atom probabilities sum to {s}"));
                }
            }
        }
        Ok(())
    }

    /// `E[e^{i⟨ζ, Z⟩}]`.
    pub fn char_fn(&self, zeta: &[f64]) -> Complex64 {
        let dot = |v: &[f64]| v.iter().zip(zeta).map(|(a, b)| a * b).sum::<f64>();
        match self {
            IncrementLaw::Deterministic { value } => Complex64::from_polar(1.0, dot(value)),
            IncrementLaw::Gaussian { mean, cov } => {
                let q: f64 = (0..zeta.len())
                    .flat_map(|i| (0..zeta.len()).map(move |j| (i, j)))
                    .map(|(i, j)| zeta[i] * cov[i][j] * zeta[j])
                    .sum();
                Complex64::from_polar((-0.5 * q).exp(), dot(mean))
            }
            IncrementLaw::FiniteMixture { atoms } => atoms
                .iter()
                .map(|a| Complex64::from_polar(a.prob, dot(&a.value)))
                .sum(),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            IncrementLaw::Deterministic { value } => value.clone(),
            IncrementLaw::Gaussian { mean, .. } => mean.clone(),
            IncrementLaw::FiniteMixture { atoms } => {
                let d = self.dim();
                (0..d).map(|c| atoms.iter().map(|a| a.prob * a.value[c]).sum()).collect()
            }
        }
    }

    /// `E[Z_a Z_b]`.
    pub fn cross_moment(&self, a: usize, b: usize) -> f64 {
        match self {
            IncrementLaw::Deterministic { value } => value[a] * value[b],
            IncrementLaw::Gaussian { mean, cov } => cov[a][b] + mean[a] * mean[b],
            IncrementLaw::FiniteMixture { atoms } => {
                atoms.iter().map(|t| t.prob * t.value[a] * t.value[b]).sum()
            }
        }
    }

    /// Raw moment `E[Z^k]` of a scalar law.
    pub fn moment(&self, k: usize) -> Result<f64> {
        if k > MAX_MOMENT_ORDER {
            return Err(Error::MomentUndefined { order: k });
        }
        Ok(match self {
            IncrementLaw::Deterministic { value } => value[0].powi(k as i32),
            IncrementLaw::Gaussian { mean, cov } => {
                let (m, v) = (mean[0], cov[0][0]);
                match k {
                    0 => 1.0,
                    1 => m,
                    2 => m * m + v,
                    3 => m * m * m + 3.0 * m * v,
                    _ => m.powi(4) + 6.0 * m * m * v + 3.0 * v * v,
                }
            }
            IncrementLaw::FiniteMixture { atoms } => {
                atoms.iter().map(|a| a.prob * a.value[0].powi(k as i32)).sum()
            }
        })
    }

    /// The law of `Z + shift`.
    pub fn shifted(&self, shift: &[f64]) -> Self {
        let add = |v: &[f64]| v.iter().zip(shift).map(|(a, b)| a + b).collect::<Vec<_>>();
        match self {
            IncrementLaw::Deterministic { value } => IncrementLaw::Deterministic { value: add(value) },
            IncrementLaw::Gaussian { mean, cov } => {
                IncrementLaw::Gaussian { mean: add(mean), cov: cov.clone() }
            }
            IncrementLaw::FiniteMixture { atoms } => IncrementLaw::FiniteMixture {
                atoms: atoms.iter().map(|a| Atom { prob: a.prob, value: add(&a.value) }).collect(),
            },
        }
    }
}

/// Continuous-time model: `Y_t = ∫₀ᵗ ξ(X_s) ds + Σ_{s≤t} ξ₂(X_{s−}, X_s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CtMapSpec {
    states: Vec<String>,
    generator: DMatrix<f64>,
    reward: Vec<f64>,
    jumps: Option<DMatrix<f64>>,
    pi: Vec<f64>,
    rate: f64,
}

impl CtMapSpec {
    pub fn new(generator: DMatrix<f64>, reward: Vec<f64>, jumps: Option<DMatrix<f64>>) -> Result<Self> {
        let s = generator.nrows();
        if generator.ncols() != s || reward.len() != s {
            return Err(Error::DimensionMismatch(format!(
                "generator is {}x{}, reward has {} entries",
                s,
                generator.ncols(),
                reward.len()
            )));
        }
        if let Some(j) = &jumps {
            if j.nrows() != s || j.ncols() != s {
                return Err(Error::DimensionMismatch("jump increments must be SxS".into()));
            }
        }
        let rate = (0..s).map(|i| generator[(i, i)].abs()).fold(0.0, f64::max);
        for i in 0..s {
            let row_sum: f64 = generator.row(i).iter().sum();
            if !row_sum.is_finite() || row_sum.abs() > 1e-12 * rate.max(1.0) {
                return Err(Error::InvalidGenerator(format!("row {i} sums to {row_sum}")));
            }
            if (0..s).any(|j| j != i && generator[(i, j)] < 0.0) {
                return Err(Error::InvalidGenerator(format!("row {i} has a negative rate")));
            }
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidGenerator("reward must be finite".into()));
        }
        // Uniformized chain I + G/Λ has the same stationary law.
        let uniform = if rate > 0.0 {
            DMatrix::identity(s, s) + &generator / rate
        } else {
            DMatrix::identity(s, s)
        };
        let pi = chain::solve_stationary(&uniform)?;
        let states = (0..s).map(|i| i.to_string()).collect();
        Ok(Self { states, generator, reward, jumps, pi, rate })
    }

    pub fn from_rows(generator: &[Vec<f64>], reward: &[f64]) -> Result<Self> {
        Self::new(chain::matrix_from_rows(generator)?, reward.to_vec(), None)
    }

    pub fn with_states(mut self, states: Vec<String>) -> Result<Self> {
        if states.len() != self.size() {
            return Err(Error::DimensionMismatch("state labels".into()));
        }
        self.states = states;
        Ok(self)
    }

    pub fn size(&self) -> usize {
        self.generator.nrows()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    pub fn jumps(&self) -> Option<&DMatrix<f64>> {
        self.jumps.as_ref()
    }

    pub fn jump(&self, from: usize, to: usize) -> f64 {
        self.jumps.as_ref().map_or(0.0, |j| j[(from, to)])
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Uniformization rate `Λ = max_x |G(x, x)|`.
    pub fn uniformization_rate(&self) -> f64 {
        self.rate
    }

    /// `lim Y_t / t = π(ξ) + Σ π(x) G(x, x′) ξ₂(x, x′)`.
    pub fn mean_rate(&self) -> f64 {
        let s = self.size();
        let mut m: f64 = self.pi.iter().zip(&self.reward).map(|(p, r)| p * r).sum();
        for x in 0..s {
            for y in (0..s).filter(|&y| y != x) {
                m += self.pi[x] * self.generator[(x, y)] * self.jump(x, y);
            }
        }
        m
    }

    /// Same process with `Y_t` replaced by `Y_t − c t`.
    pub fn shifted_reward(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.reward.iter_mut().for_each(|r| *r -= c);
        out
    }

    pub fn centered(&self) -> Self {
        self.shifted_reward(self.mean_rate())
    }

    /// `G(ζ)`: `G(x, x) + iζ ξ(x)` on the diagonal, `G(x, x′) e^{iζ ξ₂(x, x′)}` off it.
    pub fn fourier_generator(&self, zeta: f64) -> CMatrix {
        let s = self.size();
        CMatrix::from_fn(s, s, |i, j| {
            if i == j {
                Complex64::new(self.generator[(i, i)], zeta * self.reward[i])
            } else {
                Complex64::from_polar(self.generator[(i, j)], zeta * self.jump(i, j))
            }
        })
    }

    /// Taylor coefficients `C_j` of `G(ζ)` in `s = iζ`, for `j = 0..=order`.
    fn generator_series(&self, order: usize) -> Vec<DMatrix<f64>> {
        let s = self.size();
        let mut out = vec![self.generator.clone()];
        let mut fact = 1.0;
        for j in 1..=order {
            fact *= j as f64;
            out.push(DMatrix::from_fn(s, s, |a, b| {
                if a == b {
                    if j == 1 {
                        self.reward[a]
                    } else {
                        0.0
                    }
                } else {
                    self.generator[(a, b)] * self.jump(a, b).powi(j as i32) / fact
                }
            }));
        }
        out
    }

    /// `E_x[Y_t^k 1{X_t = x′}]` for `k = 0..=order`, exactly, from the
    /// exponential of a block-Toeplitz matrix.
    pub fn moment_matrices(&self, t: f64, order: usize) -> Vec<DMatrix<f64>> {
        let series: Vec<DMatrix<f64>> = self.generator_series(order).iter().map(|c| c * t).collect();
        let coeffs = linalg::power_series_exp(&series);
        let mut fact = 1.0;
        coeffs
            .into_iter()
            .enumerate()
            .map(|(k, b)| {
                if k > 0 {
                    fact *= k as f64;
                }
                b * fact
            })
            .collect()
    }

    pub fn transition(&self, t: f64) -> DMatrix<f64> {
        (&self.generator * t).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IncrementModel {
    /// Laws indexed by `from * S + to`; `None` only on zero-probability edges.
    Edges(Vec<Option<IncrementLaw>>),
    /// Time-one skeleton of a continuous-time model.
    Skeleton(CtMapSpec),
}

/// A discrete-time MAP: driving kernel plus increment laws.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    kernel: StochasticKernel,
    d: usize,
    model: IncrementModel,
    centered: bool,
    /// Mean removed by centering.
    offset: Vec<f64>,
}

impl MapSpec {
    pub fn new(
        kernel: StochasticKernel,
        d: usize,
        increments: Vec<(usize, usize, IncrementLaw)>,
        centered: bool,
    ) -> Result<Self> {
        let s = kernel.size();
        if d == 0 {
            return Err(Error::DimensionMismatch("d must be at least 1".into()));
        }
        let mut laws: Vec<Option<IncrementLaw>> = vec![None; s * s];
        for (from, to, law) in increments {
            if from >= s || to >= s {
                return Err(Error::InvalidIncrement {
                    from,
                    to,
                    reason: format!("state index out of range for {s} states"),
                });
            }
            law.validate(d, from, to)?;
            laws[from * s + to] = Some(law);
        }
        for from in 0..s {
            for to in 0..s {
                if kernel.matrix()[(from, to)] > 0.0 && laws[from * s + to].is_none() {
                    return Err(Error::MissingIncrement { from, to });
                }
            }
        }
        let spec = Self { kernel, d, model: IncrementModel::Edges(laws), centered: false, offset: vec![0.0; d] };
        Ok(if centered { spec.centered() } else { spec })
    }

    /// Additive functional `Y_n = Σ ξ(X_k)`: the increment on `(x, x′)` is `ξ(x′)`.
    pub fn functional(kernel: StochasticKernel, xi: &[f64], centered: bool) -> Result<Self> {
        let s = kernel.size();
        if xi.len() != s {
            return Err(Error::DimensionMismatch(format!("xi has {} entries for {s} states", xi.len())));
        }
        let incs = (0..s)
            .flat_map(|x| (0..s).map(move |y| (x, y)))
            .filter(|&(x, y)| kernel.matrix()[(x, y)] > 0.0)
            .map(|(x, y)| (x, y, IncrementLaw::deterministic(xi[y])))
            .collect();
        Self::new(kernel, 1, incs, centered)
    }

    pub fn kernel(&self) -> &StochasticKernel {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn size(&self) -> usize {
        self.kernel.size()
    }

    pub fn model(&self) -> &IncrementModel {
        &self.model
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn law(&self, from: usize, to: usize) -> Option<&IncrementLaw> {
        match &self.model {
            IncrementModel::Edges(laws) => laws[from * self.size() + to].as_ref(),
            IncrementModel::Skeleton(_) => None,
        }
    }

    /// Replace every increment by `increment − E_{π,0}[Y₁]`.
    pub fn centered(&self) -> Self {
        let mean = exact_mean(self);
        let neg: Vec<f64> = mean.iter().map(|m| -m).collect();
        let model = match &self.model {
            IncrementModel::Edges(laws) => {
                IncrementModel::Edges(laws.iter().map(|l| l.as_ref().map(|l| l.shifted(&neg))).collect())
            }
            IncrementModel::Skeleton(ct) => IncrementModel::Skeleton(ct.shifted_reward(mean[0])),
        };
        let offset = self.offset.iter().zip(&mean).map(|(a, b)| a + b).collect();
        Self { kernel: self.kernel.clone(), d: self.d, model, centered: true, offset }
    }

    /// `S₁(ζ)[x, x′] = P(x, x′) φ_{x,x′}(ζ)`.
    pub fn fourier_matrix(&self, zeta: &[f64]) -> CMatrix {
        let s = self.size();
        match &self.model {
            IncrementModel::Edges(laws) => {
                let p = self.kernel.matrix();
                CMatrix::from_fn(s, s, |i, j| match &laws[i * s + j] {
                    Some(law) if p[(i, j)] > 0.0 => law.char_fn(zeta) * p[(i, j)],
                    _ => Complex64::new(0.0, 0.0),
                })
            }
            IncrementModel::Skeleton(ct) => linalg::expm(&ct.fourier_generator(zeta[0])),
        }
    }

    /// `W_k(x, x′) = E_x[Y₁^k 1{X₁ = x′}]` for `k = 0..=order` (d = 1).
    pub fn moment_matrices(&self, order: usize) -> Result<Vec<DMatrix<f64>>> {
        if self.d != 1 {
            return Err(Error::DimensionMismatch("moment matrices require d = 1".into()));
        }
        if order > MAX_MOMENT_ORDER {
            return Err(Error::MomentUndefined { order });
        }
        let s = self.size();
        match &self.model {
            IncrementModel::Edges(laws) => {
                let p = self.kernel.matrix();
                (0..=order)
                    .map(|k| {
                        let mut w = DMatrix::zeros(s, s);
                        for i in 0..s {
                            for j in 0..s {
                                if let Some(law) = &laws[i * s + j] {
                                    if p[(i, j)] > 0.0 {
                                        w[(i, j)] = p[(i, j)] * law.moment(k)?;
                                    }
                                }
                            }
                        }
                        Ok(w)
                    })
                    .collect()
            }
            IncrementModel::Skeleton(ct) => {
                let mut mats = ct.moment_matrices(1.0, order);
                // The zeroth matrix must match the validated kernel exactly.
                mats[0] = self.kernel.matrix().clone();
                Ok(mats)
            }
        }
    }

    /// `E_x[Y₁,a 1{X₁ = x′}]` for each component `a`.
    fn first_moment_matrices(&self) -> Vec<DMatrix<f64>> {
        let s = self.size();
        match &self.model {
            IncrementModel::Edges(laws) => {
                let p = self.kernel.matrix();
                (0..self.d)
                    .map(|a| {
                        DMatrix::from_fn(s, s, |i, j| match &laws[i * s + j] {
                            Some(l) if p[(i, j)] > 0.0 => p[(i, j)] * l.mean()[a],
                            _ => 0.0,
                        })
                    })
                    .collect()
            }
            IncrementModel::Skeleton(ct) => vec![ct.moment_matrices(1.0, 1).swap_remove(1)],
        }
    }

    /// `E_{π,0}[Y₁,a Y₁,b]`.
    fn stationary_cross_moment(&self, a: usize, b: usize) -> f64 {
        let s = self.size();
        let pi = self.kernel.pi();
        match &self.model {
            IncrementModel::Edges(laws) => {
                let p = self.kernel.matrix();
                let mut total = 0.0;
                for i in 0..s {
                    for j in 0..s {
                        if let Some(l) = &laws[i * s + j] {
                            total += pi[i] * p[(i, j)] * l.cross_moment(a, b);
                        }
                    }
                }
                total
            }
            IncrementModel::Skeleton(ct) => {
                let w2 = &ct.moment_matrices(1.0, 2)[2];
                (0..s).map(|i| pi[i] * w2.row(i).sum()).sum()
            }
        }
    }

    /// Content hash of a canonical serialization.
    pub fn content_hash(&self) -> String {
        crate::io::hash_map_spec(self)
    }
}

/// `E_{π,0}[Y₁] = Σ π(x) P(x, x′) mean(law(x, x′))`.
pub fn exact_mean(spec: &MapSpec) -> Vec<f64> {
    let pi = spec.kernel.pi();
    spec.first_moment_matrices()
        .iter()
        .map(|w| (0..spec.size()).map(|i| pi[i] * w.row(i).sum()).sum())
        .collect()
}

/// Moment transfer: `m_j(x) = E[Y_t^j 1{X_t = x}]` for `j = 0..=order`.
#[derive(Debug, Clone)]
pub struct MomentRecursion {
    /// Transposed moment matrices `W_kᵀ`.
    wt: Vec<DMatrix<f64>>,
    m: Vec<DVector<f64>>,
    binom: Vec<Vec<f64>>,
    steps: usize,
}

impl MomentRecursion {
    pub fn new(spec: &MapSpec, initial: &[f64], order: usize) -> Result<Self> {
        let s = spec.size();
        if initial.len() != s {
            return Err(Error::DimensionMismatch("initial law length".into()));
        }
        let wt = spec.moment_matrices(order)?.iter().map(|w| w.transpose()).collect();
        let mut m = vec![DVector::zeros(s); order + 1];
        m[0] = DVector::from_column_slice(initial);
        let binom = (0..=order)
            .map(|j| {
                let mut row = vec![1.0; j + 1];
                for i in 1..j {
                    row[i] = row[i - 1] * (j - i + 1) as f64 / i as f64;
                }
                row
            })
            .collect();
        Ok(Self { wt, m, binom, steps: 0 })
    }

    pub fn step(&mut self) {
        let order = self.m.len() - 1;
        let wt = &self.wt;
        let next: Vec<DVector<f64>> = (0..=order)
            .map(|j| {
                let mut acc = DVector::zeros(self.m[0].len());
                for i in 0..=j {
                    acc += (&wt[j - i] * &self.m[i]) * self.binom[j][i];
                }
                acc
            })
            .collect();
        self.m = next;
        self.steps += 1;
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `E[Y_t^j]` for `j = 0..=order`.
    pub fn moments(&self) -> Vec<f64> {
        self.m.iter().map(|v| v.sum()).collect()
    }

    pub fn state_moments(&self, j: usize) -> &DVector<f64> {
        &self.m[j]
    }
}

/// `E_{π,0}[Y_n^k]`, exactly, for `k ≤ 4` and `d = 1`.
pub fn exact_moments(spec: &MapSpec, n: usize, k: usize) -> Result<f64> {
    Ok(exact_moments_from(spec, spec.kernel.pi(), n, k)?[k])
}

/// `E_{μ,0}[Y_n^j]` for `j = 0..=k`.
pub fn exact_moments_from(spec: &MapSpec, mu: &[f64], n: usize, k: usize) -> Result<Vec<f64>> {
    check_initial(spec.kernel(), mu)?;
    let mut rec = MomentRecursion::new(spec, mu, k)?;
    for _ in 0..n {
        rec.step();
    }
    Ok(rec.moments())
}

pub(crate) fn check_initial(kernel: &StochasticKernel, mu: &[f64]) -> Result<()> {
    if mu.len() != kernel.size() {
        return Err(Error::DimensionMismatch(format!(
            "initial law has {} entries for {} states",
            mu.len(),
            kernel.size()
        )));
    }
    if mu.iter().any(|&m| !(m >= 0.0)) || (mu.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter("initial law must be a probability vector".into()));
    }
    if let Some(state) = (0..mu.len()).find(|&i| mu[i] > 0.0 && kernel.pi()[i] == 0.0) {
        return Err(Error::UnsupportedInitial { state });
    }
    Ok(())
}

/// Applies `v ↦ v (P − Π)` on row vectors.
fn centered_step(v: &DVector<f64>, p_t: &DMatrix<f64>, pi: &[f64]) -> DVector<f64> {
    let mass = v.sum();
    let mut out = p_t * v;
    for (o, &w) in out.iter_mut().zip(pi) {
        *o -= mass * w;
    }
    out
}

/// Sums `Σ_{j≥0} u (P − Π)^j h` for each `(u, h)` pair until the geometric
/// tail bound drops below `tol`.
fn centered_series(
    kernel: &StochasticKernel,
    rows: &[DVector<f64>],
    cols: &[DVector<f64>],
    tol: f64,
) -> Result<DMatrix<f64>> {
    let pi = kernel.pi();
    let geo = kernel.geometry();
    let support = kernel.support();
    let dual_norm = |u: &DVector<f64>| {
        support.iter().map(|&i| u[i] * u[i] / pi[i]).sum::<f64>().sqrt()
    };
    let max_row = rows.iter().map(dual_norm).fold(0.0, f64::max);
    let max_col = cols.iter().map(|h| geo.norm_real(h.as_slice())).fold(0.0, f64::max);
    let mut out = DMatrix::zeros(rows.len(), cols.len());
    if max_row * max_col == 0.0 {
        return Ok(out);
    }
    let witness = kernel.contraction_witness(256)?;
    let p_t = kernel.matrix().transpose();
    let mut vs: Vec<DVector<f64>> = rows.to_vec();
    let mut j = 0usize;
    loop {
        for (a, v) in vs.iter().enumerate() {
            for (b, h) in cols.iter().enumerate() {
                out[(a, b)] += v.dot(h);
            }
        }
        j += 1;
        vs = vs.iter().map(|v| centered_step(v, &p_t, pi)).collect();
        if max_row * max_col * witness.tail_bound(j) < tol {
            break;
        }
        if j > 10_000_000 {
            return Err(Error::GapAbsent);
        }
    }
    Ok(out)
}

/// Asymptotic covariance `Σ = lim (1/n) E_{π,0}[Y_n Y_nᵀ]` of the centered
/// process, summed as `E[Y₁Y₁ᵀ] + Σ_{ℓ≥1} (C_ℓ + C_ℓᵀ)` with
/// `C_ℓ = Cov(Y₁, Y_{ℓ+1} − Y_ℓ)`.
pub fn variance_series(spec: &MapSpec, tol: f64) -> Result<DMatrix<f64>> {
    let spec = if spec.centered { spec.clone() } else { spec.centered() };
    let s = spec.size();
    let d = spec.d;
    let pi = spec.kernel.pi();
    let w1 = spec.first_moment_matrices();
    // u_a(x′) = Σ_x π(x) W1_a(x, x′), h_a(x) = Σ_x′ W1_a(x, x′).
    let us: Vec<DVector<f64>> =
        w1.iter().map(|w| DVector::from_fn(s, |j, _| (0..s).map(|i| pi[i] * w[(i, j)]).sum())).collect();
    let hs: Vec<DVector<f64>> = w1.iter().map(|w| DVector::from_fn(s, |i, _| w.row(i).sum())).collect();
    let corr = centered_series(&spec.kernel, &us, &hs, tol / 2.0)?;
    Ok(DMatrix::from_fn(d, d, |a, b| {
        spec.stationary_cross_moment(a, b) + corr[(a, b)] + corr[(b, a)]
    }))
}

/// Scalar `σ²` for `d = 1`.
pub fn variance_scalar(spec: &MapSpec, tol: f64) -> Result<f64> {
    if spec.d != 1 {
        return Err(Error::DimensionMismatch("scalar variance requires d = 1".into()));
    }
    Ok(variance_series(spec, tol)?[(0, 0)])
}

/// Horizons used to difference `E[Y_n³]`.
pub const CUMULANT_HORIZONS: (usize, usize) = (2048, 4096);

/// `μ₃ = lim E_{π,0}[Y_n³] / n` of the centered process, as the slope of
/// `n ↦ E[Y_n³]` between the two [`CUMULANT_HORIZONS`].
pub fn third_cumulant_rate(spec: &MapSpec) -> Result<f64> {
    let spec = if spec.centered { spec.clone() } else { spec.centered() };
    let (n1, n2) = CUMULANT_HORIZONS;
    let mut rec = MomentRecursion::new(&spec, spec.kernel.pi(), 3)?;
    for _ in 0..n1 {
        rec.step();
    }
    let m1 = rec.moments()[3];
    for _ in n1..n2 {
        rec.step();
    }
    let m2 = rec.moments()[3];
    Ok((m2 - m1) / (n2 - n1) as f64)
}

/// `b_μ = lim E_{μ,0}[Y_n] = Σ_{k≥0} μ (P − Π)^k h` for the centered process,
/// where `h(x) = E_x[Y₁]`.
pub fn asymptotic_bias(spec: &MapSpec, mu: &[f64], tol: f64) -> Result<Vec<f64>> {
    check_initial(spec.kernel(), mu)?;
    let spec = if spec.centered { spec.clone() } else { spec.centered() };
    let s = spec.size();
    let hs: Vec<DVector<f64>> =
        spec.first_moment_matrices().iter().map(|w| DVector::from_fn(s, |i, _| w.row(i).sum())).collect();
    let mu = DVector::from_column_slice(mu);
    let series = centered_series(&spec.kernel, std::slice::from_ref(&mu), &hs, tol)?;
    Ok(series.row(0).iter().cloned().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeStatus {
    Lattice,
    Nonlattice,
    /// Atomic mixtures or jump-only skeletons: no complete witness search.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeReport {
    pub status: LatticeStatus,
    pub is_lattice: bool,
    /// `h > 0` with `Y₁ + β(X₁) − β(X₀) ∈ a + hℤ`.
    pub span: Option<f64>,
    pub shift: Option<f64>,
    pub witness: Option<Vec<f64>>,
}

impl LatticeReport {
    fn verdict(status: LatticeStatus) -> Self {
        Self { status, is_lattice: false, span: None, shift: None, witness: None }
    }
}

const LATTICE_TOL: f64 = 1e-9;
const MIN_SPAN_REL: f64 = 1e-6;

/// Searches for `(a, h, β)` with `v(x, x′) + β(x′) − β(x) ∈ a + hℤ` on every
/// edge of the stationary support graph.
pub fn detect_lattice(spec: &MapSpec) -> LatticeReport {
    if spec.d != 1 {
        return LatticeReport::verdict(LatticeStatus::Undetermined);
    }
    let laws = match &spec.model {
        IncrementModel::Edges(laws) => laws,
        IncrementModel::Skeleton(ct) => {
            let r = ct.reward();
            let constant = r.iter().all(|&x| (x - r[0]).abs() <= LATTICE_TOL * r[0].abs().max(1.0));
            // Occupation times have a density part once the reward varies.
            let status = if constant || ct.size() == 1 {
                LatticeStatus::Undetermined
            } else {
                LatticeStatus::Nonlattice
            };
            return LatticeReport::verdict(status);
        }
    };
    let s = spec.size();
    let p = spec.kernel.matrix();
    let support = spec.kernel.support();
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut undetermined = false;
    for &x in &support {
        for &y in &support {
            if p[(x, y)] <= 0.0 {
                continue;
            }
            match laws[x * s + y].as_ref() {
                Some(IncrementLaw::Deterministic { value }) => edges.push((x, y, value[0])),
                Some(IncrementLaw::Gaussian { cov, .. }) if cov[0][0] > 0.0 => {
                    return LatticeReport::verdict(LatticeStatus::Nonlattice)
                }
                Some(IncrementLaw::Gaussian { mean, .. }) => edges.push((x, y, mean[0])),
                Some(IncrementLaw::FiniteMixture { atoms }) => {
                    let live: Vec<&Atom> = atoms.iter().filter(|a| a.prob > 0.0).collect();
                    if live.len() == 1 {
                        edges.push((x, y, live[0].value[0]));
                    } else {
                        undetermined = true;
                    }
                }
                None => {}
            }
        }
    }
    if undetermined {
        return LatticeReport::verdict(LatticeStatus::Undetermined);
    }
    lattice_from_edges(s, &support, &edges)
}

fn lattice_from_edges(s: usize, support: &[usize], edges: &[(usize, usize, f64)]) -> LatticeReport {
    let scale = edges.iter().map(|e| e.2.abs()).fold(0.0, f64::max).max(1.0);
    let root = support[0];
    let mut depth = vec![usize::MAX; s];
    let mut beta0 = vec![0.0; s];
    let mut is_tree = vec![false; edges.len()];
    depth[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(x) = queue.pop_front() {
        for (k, &(a, b, v)) in edges.iter().enumerate() {
            if a == x && depth[b] == usize::MAX {
                depth[b] = depth[x] + 1;
                beta0[b] = beta0[x] + v;
                is_tree[k] = true;
                queue.push_back(b);
            }
        }
    }
    // Need s_e − a l_e ∈ hℤ for every non-tree edge.
    let mut pivot: Option<(i64, f64)> = None;
    let mut residues: Vec<f64> = Vec::new();
    for (k, &(x, y, v)) in edges.iter().enumerate() {
        if is_tree[k] {
            continue;
        }
        let mut l = 1 + depth[x] as i64 - depth[y] as i64;
        let mut sv = v + beta0[x] - beta0[y];
        if l == 0 {
            residues.push(sv);
            continue;
        }
        let (mut g, mut sg) = pivot.unwrap_or((0, 0.0));
        // Integer Euclid on (g, l), carrying the real parts along.
        while l != 0 {
            let q = g.div_euclid(l);
            let (ng, nsg) = (l, sv);
            l = g - q * l;
            sv = sg - q as f64 * sv;
            g = ng;
            sg = nsg;
        }
        if g < 0 {
            g = -g;
            sg = -sg;
        }
        if sv != 0.0 {
            residues.push(sv);
        }
        pivot = Some((g, sg));
    }
    let a = pivot.map_or(0.0, |(g, sg)| sg / g as f64);
    let tol = LATTICE_TOL * scale;
    let nonzero: Vec<f64> = residues.iter().map(|r| r.abs()).filter(|&r| r > tol).collect();
    let h = if nonzero.is_empty() {
        if a.abs() > tol {
            a.abs()
        } else {
            1.0
        }
    } else {
        match real_gcd(&nonzero, tol, MIN_SPAN_REL * scale) {
            Some(h) => h,
            None => return LatticeReport::verdict(LatticeStatus::Nonlattice),
        }
    };
    let witness: Vec<f64> = (0..s)
        .map(|x| if depth[x] == usize::MAX { 0.0 } else { -beta0[x] + a * depth[x] as f64 })
        .collect();
    // Certify the witness edge by edge.
    let ok = edges.iter().all(|&(x, y, v)| {
        let r = (v + witness[y] - witness[x] - a) / h;
        (r - r.round()).abs() * h <= 1e3 * tol
    });
    if !ok {
        return LatticeReport::verdict(LatticeStatus::Nonlattice);
    }
    LatticeReport {
        status: LatticeStatus::Lattice,
        is_lattice: true,
        span: Some(h),
        shift: Some(a.rem_euclid(h)),
        witness: Some(witness),
    }
}

/// Largest `h ≥ min_span` with every value in `hℤ` up to `tol`, via the
/// Euclidean algorithm on reals.
fn real_gcd(values: &[f64], tol: f64, min_span: f64) -> Option<f64> {
    let mut g = values[0];
    for &v in &values[1..] {
        let (mut a, mut b) = (g.max(v), g.min(v));
        while b > tol {
            let r = a.rem_euclid(b);
            a = b;
            b = if b - r <= tol { 0.0 } else { r };
            if a < min_span {
                return None;
            }
        }
        g = a;
    }
    if g < min_span {
        return None;
    }
    values
        .iter()
        .all(|&v| {
            let r = v / g;
            (r - r.round()).abs() * g <= 1e2 * tol
        })
        .then_some(g)
}

/// Time-one skeleton `(X_n, Y_n)` of a continuous-time model.
pub fn ct_sample_skeleton(ct: &CtMapSpec) -> Result<MapSpec> {
    let p = ct.transition(1.0);
    // exp(G) rows sum to one up to roundoff; renormalize before validation.
    let p = DMatrix::from_fn(p.nrows(), p.ncols(), |i, j| p[(i, j)].max(0.0) / p.row(i).iter().map(|x| x.max(0.0)).sum::<f64>());
    let kernel = StochasticKernel::new(ct.states().to_vec(), p)?;
    Ok(MapSpec { kernel, d: 1, model: IncrementModel::Skeleton(ct.clone()), centered: false, offset: vec![0.0] })
}
