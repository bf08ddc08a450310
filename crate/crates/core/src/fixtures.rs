//! Built-in models with oracle values recorded in `fixtures/manifest.json`.
//!
//! The manifest is produced by `fixtures/oracles.py`, which uses none of
//! this crate's code paths.

use serde::{Deserialize, Serialize};

use crate::chain::StochasticKernel;
use crate::error::{Error, Result};
use crate::io::KernelFile;
use crate::mestim::{ContrastFamily, ContrastKind, ProblemFile};
use crate::model::{CtMapSpec, IncrementLaw, MapSpec};

pub const NAMES: [&str; 9] = [
    "two_state",
    "iid_rademacher",
    "lattice_pm1",
    "skewed_mixture",
    "iid_gaussian",
    "birth_death_5",
    "ct_two_state",
    "mean_contrast_problem",
    "log_cosh_problem",
];

/// Kernel grid `[[1 − a, a], [b, 1 − b]]` of the estimation fixtures.
pub const THETA_GRID: [(f64, f64); 5] = [(0.3, 0.2), (0.35, 0.25), (0.4, 0.3), (0.25, 0.3), (0.3, 0.4)];
pub const SKEW_P: f64 = 0.02;
pub const SKEW_SD: f64 = 0.1;

#[derive(Debug, Clone)]
pub enum Fixture {
    Discrete(MapSpec),
    Continuous(CtMapSpec),
    Problem(ProblemFile),
}

fn kernel(rows: &[Vec<f64>]) -> StochasticKernel {
    StochasticKernel::from_rows(rows).expect("fixture kernels are stochastic")
}

fn iid_rows(p: &[f64]) -> Vec<Vec<f64>> {
    vec![p.to_vec(); p.len()]
}

/// Increment law on `(x, y)` depends on `y` only.
fn target_laws(k: StochasticKernel, laws: &[IncrementLaw]) -> MapSpec {
    let s = k.size();
    let incs = (0..s).flat_map(|x| (0..s).map(move |y| (x, y))).map(|(x, y)| (x, y, laws[y].clone())).collect();
    MapSpec::new(k, 1, incs, true).expect("fixture increments are valid")
}

fn birth_death_rows() -> Vec<Vec<f64>> {
    (0..5)
        .map(|x| {
            let mut row = vec![0.0; 5];
            let up = if x < 4 { 0.3 } else { 0.0 };
            let down = if x > 0 { 0.2 } else { 0.0 };
            if x < 4 {
                row[x + 1] = up;
            }
            if x > 0 {
                row[x - 1] = down;
            }
            row[x] = 1.0 - up - down;
            row
        })
        .collect()
}

fn problem(kind: ContrastKind, w: f64) -> ProblemFile {
    ProblemFile {
        family: ContrastFamily {
            kind,
            alpha_domain: [-0.5, 1.5],
            xi: vec![vec![0.0, 1.0]; 2],
            w: vec![w; 2],
            scale: 1.0,
        },
        theta_grid: THETA_GRID
            .iter()
            .map(|&(a, b)| KernelFile { states: None, p: vec![vec![1.0 - a, a], vec![b, 1.0 - b]], pi: None })
            .collect(),
    }
}

pub fn fixture(name: &str) -> Result<Fixture> {
    let half = iid_rows(&[0.5, 0.5]);
    Ok(match name {
        "two_state" => {
            Fixture::Discrete(MapSpec::functional(kernel(&[vec![0.7, 0.3], vec![0.2, 0.8]]), &[0.0, 1.0], true)?)
        }
        "iid_rademacher" => Fixture::Discrete(MapSpec::functional(kernel(&half), &[-1.0, 1.0], true)?),
        "lattice_pm1" => {
            Fixture::Discrete(MapSpec::functional(kernel(&[vec![0.6, 0.4], vec![0.4, 0.6]]), &[-1.0, 1.0], true)?)
        }
        "skewed_mixture" => Fixture::Discrete(target_laws(
            kernel(&iid_rows(&[1.0 - SKEW_P, SKEW_P])),
            &[IncrementLaw::gaussian(-SKEW_P, SKEW_SD * SKEW_SD), IncrementLaw::gaussian(1.0 - SKEW_P, SKEW_SD * SKEW_SD)],
        )),
        "iid_gaussian" => Fixture::Discrete(target_laws(
            kernel(&half),
            &[IncrementLaw::gaussian(-0.5, 1.0), IncrementLaw::gaussian(0.5, 1.0)],
        )),
        "birth_death_5" => {
            Fixture::Discrete(MapSpec::functional(kernel(&birth_death_rows()), &[0.0, 1.0, 2.0, 3.0, 4.0], true)?)
        }
        "ct_two_state" => Fixture::Continuous(CtMapSpec::from_rows(&[vec![-1.0, 1.0], vec![2.0, -2.0]], &[0.0, 1.0])?),
        "mean_contrast_problem" => Fixture::Problem(problem(ContrastKind::Mean, 1.0)),
        "log_cosh_problem" => Fixture::Problem(problem(ContrastKind::LogCosh, 0.385)),
        other => return Err(Error::UnknownFixture(other.to_string())),
    })
}

pub fn map_fixture(name: &str) -> Result<MapSpec> {
    match fixture(name)? {
        Fixture::Discrete(s) => Ok(s),
        _ => Err(Error::InvalidParameter(format!("fixture `{name}` is not a discrete-time model"))),
    }
}

pub fn ct_fixture(name: &str) -> Result<CtMapSpec> {
    match fixture(name)? {
        Fixture::Continuous(c) => Ok(c),
        _ => Err(Error::InvalidParameter(format!("fixture `{name}` is not a continuous-time model"))),
    }
}

pub fn problem_fixture(name: &str) -> Result<ProblemFile> {
    match fixture(name)? {
        Fixture::Problem(p) => Ok(p),
        _ => Err(Error::InvalidParameter(format!("fixture `{name}` is not an estimation problem"))),
    }
}

/// Discrete-time fixtures, in registry order.
pub fn discrete_names() -> Vec<&'static str> {
    NAMES.iter().copied().filter(|n| matches!(fixture(n), Ok(Fixture::Discrete(_)))).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Oracle {
    pub value: serde_json::Value,
    pub method: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub kind: String,
    pub description: String,
    pub oracles: std::collections::BTreeMap<String, Oracle>,
}

impl ManifestEntry {
    pub fn scalar(&self, key: &str) -> Option<f64> {
        self.oracles.get(key)?.value.as_f64()
    }

    pub fn vector(&self, key: &str) -> Option<Vec<f64>> {
        self.oracles.get(key)?.value.as_array()?.iter().map(|v| v.as_f64()).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub fixtures: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn entry(&self, name: &str) -> Option<&ManifestEntry> {
        self.fixtures.iter().find(|e| e.name == name)
    }
}

pub fn manifest() -> Manifest {
    serde_json::from_str(include_str!("../fixtures/manifest.json")).expect("checked-in manifest parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_complete() {
        for name in NAMES {
            fixture(name).unwrap();
        }
        assert!(matches!(fixture("nope"), Err(Error::UnknownFixture(_))));
        let m = manifest();
        for name in NAMES.iter().filter(|n| **n != "log_cosh_problem") {
            assert!(m.entry(name).is_some(), "{name} missing from manifest");
        }
    }

    #[test]
    fn discrete_fixtures_are_centered() {
        for name in discrete_names() {
            let s = map_fixture(name).unwrap();
            assert!(s.is_centered());
            let mean = manifest().entry(name).unwrap().scalar("mean").unwrap();
            assert!((s.offset()[0] - mean).abs() < 1e-12, "{name}");
        }
    }
}
