//! Seeded trajectory simulation.
//!
//! Path `i` of a batch draws from its own ChaCha8 stream (`seed`, stream `i`),
//! and batches are assembled in path order, so results do not depend on the
//! number of worker threads. Continuous-time paths use exact jump-chain
//! simulation.
//!
//! Gaussian increments are not drawn step by step for terminal values: given
//! the path of `X`, their sum over a segment is Gaussian with summed mean and
//! covariance, so one draw per checkpoint reproduces the exact law.
//! [`increment_panel`] still draws each step.

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_initial, CtMapSpec, IncrementLaw, IncrementModel, MapSpec};
use crate::stats::normal_quantile;

/// Independent stream for path `index` under `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A child seed for sub-task `label` (e.g. one horizon of a list).
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(label);
    rng.next_u64()
}

/// Uniform on `(0, 1)`, never 0 or 1.
#[inline]
pub fn open_uniform(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn standard_normal(rng: &mut impl RngCore) -> f64 {
    normal_quantile(open_uniform(rng))
}

/// Runs `f` on a pool of `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Steps(usize),
    Time(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBatch {
    pub spec_id: String,
    pub horizon: Horizon,
    pub n_paths: usize,
    pub seed: u64,
    pub d: usize,
    /// Row-major `n_paths × d`.
    pub terminal_y: Vec<f64>,
    pub terminal_x: Vec<usize>,
}

impl TrajectoryBatch {
    /// First component of every terminal value.
    pub fn y(&self) -> Vec<f64> {
        self.terminal_y.iter().step_by(self.d).cloned().collect()
    }
}

/// Sampler over a discrete-time model with precomputed cumulative rows.
struct Sampler<'a> {
    spec: &'a MapSpec,
    cumulative: Vec<Vec<f64>>,
}

impl<'a> Sampler<'a> {
    fn new(spec: &'a MapSpec) -> Self {
        let p = spec.kernel().matrix();
        let s = spec.size();
        let cumulative = (0..s)
            .map(|i| {
                let mut acc = 0.0;
                (0..s)
                    .map(|j| {
                        acc += p[(i, j)];
                        acc
                    })
                    .collect()
            })
            .collect();
        Self { spec, cumulative }
    }

    #[inline]
    fn next_state(&self, x: usize, rng: &mut impl RngCore) -> usize {
        pick(&self.cumulative[x], open_uniform(rng))
    }
}

/// Index of the first cumulative weight exceeding `u`, skipping zero-weight
/// entries at the end of the row.
#[inline]
fn pick(cumulative: &[f64], u: f64) -> usize {
    let total = *cumulative.last().expect("non-empty row");
    let target = u * total;
    let mut last_live = 0;
    for (j, &c) in cumulative.iter().enumerate() {
        let live = j == 0 && c > 0.0 || j > 0 && c > cumulative[j - 1];
        if live {
            last_live = j;
            if target < c {
                return j;
            }
        }
    }
    last_live
}

fn psd_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = cov.clone().symmetric_eigen();
    let d = cov.nrows();
    DMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, j)] * eig.eigenvalues[j].max(0.0).sqrt())
}

fn draw_initial(mu: &[f64], rng: &mut impl RngCore) -> usize {
    let mut acc = 0.0;
    let cumulative: Vec<f64> = mu
        .iter()
        .map(|m| {
            acc += m;
            acc
        })
        .collect();
    pick(&cumulative, open_uniform(rng))
}

/// Accumulates one path: deterministic parts and Gaussian means go straight
/// into `y`; Gaussian covariance is pooled until the next flush.
struct PathState {
    x: usize,
    y: Vec<f64>,
    pooled_cov: Vec<f64>,
    pooled: bool,
}

impl PathState {
    fn flush(&mut self, rng: &mut impl RngCore) {
        if !self.pooled {
            return;
        }
        let d = self.y.len();
        if d == 1 {
            let sd = self.pooled_cov[0].max(0.0).sqrt();
            self.y[0] += sd * standard_normal(rng);
        } else {
            let cov = DMatrix::from_row_slice(d, d, &self.pooled_cov);
            let l = psd_factor(&cov);
            let z: Vec<f64> = (0..d).map(|_| standard_normal(rng)).collect();
            for i in 0..d {
                self.y[i] += (0..d).map(|j| l[(i, j)] * z[j]).sum::<f64>();
            }
        }
        self.pooled_cov.iter_mut().for_each(|c| *c = 0.0);
        self.pooled = false;
    }
}

fn edge_step(sampler: &Sampler<'_>, st: &mut PathState, rng: &mut ChaCha8Rng) {
    let spec = sampler.spec;
    let from = st.x;
    match spec.model() {
        IncrementModel::Edges(_) => {
            let to = sampler.next_state(from, rng);
            match spec.law(from, to).expect("law on supported edge") {
                IncrementLaw::Deterministic { value } => {
                    st.y.iter_mut().zip(value).for_each(|(y, v)| *y += v);
                }
                IncrementLaw::Gaussian { mean, cov } => {
                    let d = mean.len();
                    st.y.iter_mut().zip(mean).for_each(|(y, v)| *y += v);
                    for (row, c) in st.pooled_cov.chunks_mut(d).zip(cov) {
                        row.iter_mut().zip(c).for_each(|(p, v)| *p += v);
                    }
                    st.pooled = true;
                }
                IncrementLaw::FiniteMixture { atoms } => {
                    let mut acc = 0.0;
                    let cumulative: Vec<f64> = atoms
                        .iter()
                        .map(|a| {
                            acc += a.prob;
                            acc
                        })
                        .collect();
                    let k = pick(&cumulative, open_uniform(rng));
                    st.y.iter_mut().zip(&atoms[k].value).for_each(|(y, v)| *y += v);
                }
            }
            st.x = to;
        }
        IncrementModel::Skeleton(ct) => {
            let (x, dy) = ct_interval(ct, from, 1.0, &[], rng, &mut Vec::new());
            st.x = x;
            st.y[0] += dy;
        }
    }
}

/// Exact jump simulation over `[0, t]` from `x`. Returns the final state and
/// increment; the increment at each time in `marks` (sorted, within `[0, t]`)
/// is pushed to `out`.
fn ct_interval(ct: &CtMapSpec, mut x: usize, t: f64, marks: &[f64], rng: &mut impl RngCore, out: &mut Vec<f64>) -> (usize, f64) {
    let g = ct.generator();
    let s = ct.size();
    let reward = ct.reward();
    let mut clock = 0.0;
    let mut y = 0.0;
    let mut next_mark = 0;
    loop {
        let rate = -g[(x, x)];
        let hold = if rate > 0.0 { -open_uniform(rng).ln() / rate } else { f64::INFINITY };
        let end = (clock + hold).min(t);
        while next_mark < marks.len() && marks[next_mark] <= end {
            out.push(y + reward[x] * (marks[next_mark] - clock));
            next_mark += 1;
        }
        y += reward[x] * (end - clock);
        if clock + hold >= t {
            return (x, y);
        }
        clock += hold;
        let u = open_uniform(rng) * rate;
        let mut acc = 0.0;
        let mut next = x;
        for j in (0..s).filter(|&j| j != x) {
            if g[(x, j)] > 0.0 {
                acc += g[(x, j)];
                next = j;
                if u < acc {
                    break;
                }
            }
        }
        y += ct.jump(x, next);
        x = next;
    }
}

/// Simulates `n_paths` independent paths of `n` steps.
pub fn simulate_discrete(spec: &MapSpec, n: usize, n_paths: usize, seed: u64, mu: Option<&[f64]>) -> Result<TrajectoryBatch> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    Ok(simulate_checkpoints(spec, &[n], n_paths, seed, mu)?.swap_remove(0))
}

/// One set of paths observed at every horizon in `checkpoints` (increasing).
pub fn simulate_checkpoints(
    spec: &MapSpec,
    checkpoints: &[usize],
    n_paths: usize,
    seed: u64,
    mu: Option<&[f64]>,
) -> Result<Vec<TrajectoryBatch>> {
    let init = mu.unwrap_or(spec.kernel().pi()).to_vec();
    check_initial(spec.kernel(), &init)?;
    if checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("checkpoints must increase".into()));
    }
    let d = spec.dim();
    let sampler = Sampler::new(spec);
    let paths: Vec<Vec<(usize, Vec<f64>)>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let mut st = PathState { x: draw_initial(&init, &mut rng), y: vec![0.0; d], pooled_cov: vec![0.0; d * d], pooled: false };
            let mut step = 0;
            let mut out = Vec::with_capacity(checkpoints.len());
            for &cp in checkpoints {
                while step < cp {
                    edge_step(&sampler, &mut st, &mut rng);
                    step += 1;
                }
                st.flush(&mut rng);
                out.push((st.x, st.y.clone()));
            }
            out
        })
        .collect();
    let id = spec.content_hash();
    Ok(checkpoints
        .iter()
        .enumerate()
        .map(|(k, &cp)| TrajectoryBatch {
            spec_id: id.clone(),
            horizon: Horizon::Steps(cp),
            n_paths,
            seed,
            d,
            terminal_y: paths.iter().flat_map(|p| p[k].1.iter().cloned()).collect(),
            terminal_x: paths.iter().map(|p| p[k].0).collect(),
        })
        .collect())
}

/// Continuous-time paths on `[0, t]`, started from `π` (or `mu`).
pub fn simulate_ct(ct: &CtMapSpec, t: f64, n_paths: usize, seed: u64, mu: Option<&[f64]>) -> Result<TrajectoryBatch> {
    Ok(simulate_ct_checkpoints(ct, &[t], n_paths, seed, mu)?.swap_remove(0))
}

/// One set of continuous-time paths observed at each time in `times`.
pub fn simulate_ct_checkpoints(
    ct: &CtMapSpec,
    times: &[f64],
    n_paths: usize,
    seed: u64,
    mu: Option<&[f64]>,
) -> Result<Vec<TrajectoryBatch>> {
    if times.is_empty() || times.iter().any(|&t| !(t > 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("times must be positive and increasing".into()));
    }
    let init = mu.unwrap_or(ct.pi()).to_vec();
    if init.len() != ct.size() {
        return Err(Error::DimensionMismatch("initial law length".into()));
    }
    if let Some(state) = (0..init.len()).find(|&i| init[i] > 0.0 && ct.pi()[i] == 0.0) {
        return Err(Error::UnsupportedInitial { state });
    }
    let horizon = *times.last().expect("non-empty");
    let paths: Vec<(Vec<f64>, usize)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let x0 = draw_initial(&init, &mut rng);
            let mut marks = Vec::with_capacity(times.len());
            let (x, _) = ct_interval(ct, x0, horizon, times, &mut rng, &mut marks);
            (marks, x)
        })
        .collect();
    let id = crate::io::hash_ct_spec(ct);
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| TrajectoryBatch {
            spec_id: id.clone(),
            horizon: Horizon::Time(t),
            n_paths,
            seed,
            d: 1,
            terminal_y: paths.iter().map(|p| p.0[k]).collect(),
            // The state is only tracked at the final horizon.
            terminal_x: if k + 1 == times.len() { paths.iter().map(|p| p.1).collect() } else { Vec::new() },
        })
        .collect())
}

/// Per-step increments `ξ_k = Y_k − Y_{k−1}`, `k = 1..=n` (first component).
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementPanel {
    pub n: usize,
    pub n_paths: usize,
    /// Row-major `n_paths × n`.
    pub data: Vec<f64>,
}

impl IncrementPanel {
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.data[p * self.n + k]).collect()
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.data[p * self.n..(p + 1) * self.n]
    }
}

pub fn increment_panel(spec: &MapSpec, n: usize, n_paths: usize, seed: u64) -> Result<IncrementPanel> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let d = spec.dim();
    let sampler = Sampler::new(spec);
    let pi = spec.kernel().pi().to_vec();
    let rows: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let mut st = PathState { x: draw_initial(&pi, &mut rng), y: vec![0.0; d], pooled_cov: vec![0.0; d * d], pooled: false };
            let mut row = Vec::with_capacity(n);
            // Restarting from zero keeps each increment free of rounding
            // that would depend on the running sum.
            for _ in 0..n {
                st.y[0] = 0.0;
                edge_step(&sampler, &mut st, &mut rng);
                st.flush(&mut rng);
                row.push(st.y[0]);
            }
            row
        })
        .collect();
    Ok(IncrementPanel { n, n_paths, data: rows.concat() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::StochasticKernel;
    use crate::stats;

    fn two_state(centered: bool) -> MapSpec {
        let k = StochasticKernel::from_rows(&[vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        MapSpec::functional(k, &[0.0, 1.0], centered).unwrap()
    }

    #[test]
    fn panel_increments_are_exact_values() {
        let spec = two_state(true);
        let panel = increment_panel(&spec, 40, 200, 9).unwrap();
        // Two values, bit-exact at every step.
        let mut bits: Vec<u64> = (0..40).flat_map(|k| panel.column(k)).map(f64::to_bits).collect();
        bits.sort_unstable();
        bits.dedup();
        assert_eq!(bits.len(), 2);
    }

    #[test]
    fn zero_increments_stay_zero() {
        let k = StochasticKernel::from_rows(&[vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let spec = MapSpec::functional(k, &[0.0, 0.0], false).unwrap();
        let b = simulate_discrete(&spec, 50, 100, 1, None).unwrap();
        assert!(b.terminal_y.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let spec = two_state(true);
        let a = with_threads(1, || simulate_discrete(&spec, 100, 2000, 42, None).unwrap());
        let b = with_threads(4, || simulate_discrete(&spec, 100, 2000, 42, None).unwrap());
        assert_eq!(a, b);
        let c = simulate_discrete(&spec, 100, 2000, 43, None).unwrap();
        assert_ne!(a.terminal_y, c.terminal_y);
    }

    #[test]
    fn rademacher_lln() {
        let k = StochasticKernel::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let spec = MapSpec::functional(k, &[-1.0, 1.0], false).unwrap();
        let n = 100_000;
        let b = simulate_discrete(&spec, n, 20, 3, None).unwrap();
        for y in b.y() {
            assert!((y / n as f64).abs() < 4.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn initial_law_must_be_supported() {
        let k = StochasticKernel::from_rows(&[vec![0.5, 0.5, 0.0], vec![0.0, 0.3, 0.7], vec![0.0, 0.6, 0.4]])
            .unwrap();
        let spec = MapSpec::functional(k, &[0.0, 1.0, 2.0], true).unwrap();
        assert!(matches!(
            simulate_discrete(&spec, 5, 10, 1, Some(&[1.0, 0.0, 0.0])),
            Err(Error::UnsupportedInitial { state: 0 })
        ));
    }

    #[test]
    fn checkpoints_match_separate_runs() {
        let spec = two_state(true);
        let multi = simulate_checkpoints(&spec, &[10, 20], 300, 9, None).unwrap();
        let single = simulate_discrete(&spec, 20, 300, 9, None).unwrap();
        assert_eq!(multi[1].terminal_y, single.terminal_y);
    }

    #[test]
    fn ct_constant_reward() {
        let ct = CtMapSpec::from_rows(&[vec![-1.0, 1.0], vec![2.0, -2.0]], &[1.5, 1.5]).unwrap();
        let b = simulate_ct(&ct, 3.0, 50, 5, None).unwrap();
        assert!(b.terminal_y.iter().all(|&y| (y - 4.5).abs() < 1e-12));
        let one = CtMapSpec::from_rows(&[vec![0.0]], &[1.0]).unwrap();
        let b = simulate_ct(&one, 2.5, 5, 5, None).unwrap();
        assert!(b.terminal_y.iter().all(|&y| (y - 2.5).abs() < 1e-15));
    }

    #[test]
    fn ct_checkpoints_are_path_prefixes() {
        let ct = CtMapSpec::from_rows(&[vec![-1.0, 1.0], vec![2.0, -2.0]], &[0.0, 1.0]).unwrap();
        let b = simulate_ct_checkpoints(&ct, &[1.0, 2.0], 200, 5, None).unwrap();
        for (a, c) in b[0].terminal_y.iter().zip(&b[1].terminal_y) {
            assert!(*a <= *c + 1e-12 && *a >= 0.0 && *a <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn constant_panel() {
        let k = StochasticKernel::from_rows(&[vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let spec = MapSpec::functional(k, &[2.0, 2.0], false).unwrap();
        let p = increment_panel(&spec, 6, 40, 1).unwrap();
        assert!(p.data.iter().all(|&v| v == 2.0));
        assert!(stats::correlation(&p.column(0), &p.column(1)).is_none());
    }

    #[test]
    fn gaussian_pooling_matches_panel_sums() {
        // Same law by two routes: pooled terminal draws vs summed panels.
        let k = StochasticKernel::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let mut incs = Vec::new();
        for x in 0..2 {
            incs.push((x, 0, IncrementLaw::gaussian(-0.5, 1.0)));
            incs.push((x, 1, IncrementLaw::gaussian(0.5, 1.0)));
        }
        let spec = MapSpec::new(k, 1, incs, false).unwrap();
        let pooled = simulate_discrete(&spec, 8, 20_000, 11, None).unwrap().y();
        let panel = increment_panel(&spec, 8, 20_000, 12).unwrap();
        let summed: Vec<f64> = (0..20_000).map(|p| panel.row(p).iter().sum()).collect();
        assert!(stats::ks_two_sample(&pooled, &summed).p_value > 1e-3);
        assert!((stats::variance(&pooled) / 10.0 - 1.0).abs() < 0.05);
    }
}
