//! JSON model files, content hashes and atomic output.
//!
//! Hashes are SHA-256 over the canonical serialization of the *resolved*
//! model (after centering), so two files describing the same model hash
//! equally regardless of key order or whitespace.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chain::{matrix_from_rows, StochasticKernel};
use crate::error::{Error, Result};
use crate::model::{CtMapSpec, IncrementLaw, IncrementModel, MapSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<String>>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeIncrement {
    pub from: usize,
    pub to: usize,
    #[serde(flatten)]
    pub law: IncrementLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpecFile {
    pub kernel: KernelFile,
    #[serde(default = "one")]
    pub d: usize,
    pub increments: Vec<EdgeIncrement>,
    #[serde(default)]
    pub centered: bool,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtSpecFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<String>>,
    pub generator: Vec<Vec<f64>>,
    pub reward: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_increments: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub centered: bool,
}

/// Either kind of model file, told apart by the `generator` key.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Discrete(MapSpec),
    Continuous(CtMapSpec),
}

impl ModelSpec {
    pub fn content_hash(&self) -> String {
        match self {
            ModelSpec::Discrete(s) => hash_map_spec(s),
            ModelSpec::Continuous(c) => hash_ct_spec(c),
        }
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl KernelFile {
    pub fn build(&self) -> Result<StochasticKernel> {
        let p = matrix_from_rows(&self.p)?;
        let states = match &self.states {
            Some(s) => s.clone(),
            None => (0..p.nrows()).map(|i| i.to_string()).collect(),
        };
        match &self.pi {
            Some(pi) => StochasticKernel::with_stationary(states, p, pi),
            None => StochasticKernel::new(states, p),
        }
    }

    pub fn from_kernel(k: &StochasticKernel) -> Self {
        Self { states: Some(k.states().to_vec()), p: rows(k.matrix()), pi: Some(k.pi().to_vec()) }
    }
}

impl MapSpecFile {
    pub fn build(&self) -> Result<MapSpec> {
        let kernel = self.kernel.build()?;
        let incs = self.increments.iter().map(|e| (e.from, e.to, e.law.clone())).collect();
        MapSpec::new(kernel, self.d, incs, self.centered)
    }
}

impl CtSpecFile {
    pub fn build(&self) -> Result<CtMapSpec> {
        let g = matrix_from_rows(&self.generator)?;
        let jumps = self.jump_increments.as_ref().map(|j| matrix_from_rows(j)).transpose()?;
        let mut ct = CtMapSpec::new(g, self.reward.clone(), jumps)?;
        if let Some(s) = &self.states {
            ct = ct.with_states(s.clone())?;
        }
        Ok(if self.centered { ct.centered() } else { ct })
    }

    pub fn from_spec(ct: &CtMapSpec) -> Self {
        Self {
            states: Some(ct.states().to_vec()),
            generator: rows(ct.generator()),
            reward: ct.reward().to_vec(),
            jump_increments: ct.jumps().map(rows),
            centered: false,
        }
    }
}

/// Canonical document of a resolved discrete model.
#[derive(Serialize)]
struct MapSpecDoc {
    kernel: KernelFile,
    d: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    increments: Option<Vec<EdgeIncrement>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skeleton: Option<CtSpecFile>,
}

/// File representation of a discrete model with explicit edge laws; `None`
/// for continuous-time skeletons.
pub fn map_spec_file(spec: &MapSpec) -> Option<MapSpecFile> {
    let IncrementModel::Edges(laws) = spec.model() else { return None };
    let s = spec.size();
    let increments = laws
        .iter()
        .enumerate()
        .filter_map(|(k, l)| l.as_ref().map(|law| EdgeIncrement { from: k / s, to: k % s, law: law.clone() }))
        .collect();
    // Laws are already shifted, so the file must not center again.
    Some(MapSpecFile { kernel: KernelFile::from_kernel(spec.kernel()), d: spec.dim(), increments, centered: false })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of the compact JSON serialization of `value`.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("value serializes to JSON"))
}

pub fn hash_map_spec(spec: &MapSpec) -> String {
    let (increments, skeleton) = match spec.model() {
        IncrementModel::Edges(_) => (map_spec_file(spec).map(|f| f.increments), None),
        IncrementModel::Skeleton(ct) => (None, Some(CtSpecFile::from_spec(ct))),
    };
    let doc = MapSpecDoc {
        kernel: KernelFile::from_kernel(spec.kernel()),
        d: spec.dim(),
        increments,
        skeleton,
    };
    sha256_hex(&serde_json::to_vec(&doc).expect("model documents serialize"))
}

pub fn hash_ct_spec(ct: &CtMapSpec) -> String {
    sha256_hex(&serde_json::to_vec(&CtSpecFile::from_spec(ct)).expect("model documents serialize"))
}

pub fn parse_model(text: &str) -> Result<ModelSpec> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("generator").is_some() {
        Ok(ModelSpec::Continuous(serde_json::from_value::<CtSpecFile>(value)?.build()?))
    } else {
        Ok(ModelSpec::Discrete(serde_json::from_value::<MapSpecFile>(value)?.build()?))
    }
}

pub fn load_model(path: &Path) -> Result<ModelSpec> {
    parse_model(&fs::read_to_string(path)?)
}

pub fn load_kernel(path: &Path) -> Result<StochasticKernel> {
    serde_json::from_str::<KernelFile>(&fs::read_to_string(path)?)?.build()
}

/// Write via a sibling temporary file and rename, so readers never observe
/// a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::InvalidParameter(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// CSV with a header row; numbers use the shortest round-trip form.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    write_atomic(path, csv_string(header, rows).as_bytes())
}

pub fn csv_string(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Little-endian `f64` column.
pub fn f64_column_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn read_f64_column(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::InvalidParameter(format!("{} bytes is not a whole number of f64 values", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_STATE: &str = r#"{
        "kernel": {"states": ["a", "b"], "P": [[0.7, 0.3], [0.2, 0.8]]},
        "d": 1,
        "increments": [
            {"from": 0, "to": 0, "kind": "deterministic", "value": [0.0]},
            {"from": 0, "to": 1, "kind": "deterministic", "value": [1.0]},
            {"from": 1, "to": 0, "kind": "deterministic", "value": [0.0]},
            {"from": 1, "to": 1, "kind": "deterministic", "value": [1.0]}
        ],
        "centered": true
    }"#;

    #[test]
    fn parses_and_hashes_stably() {
        let ModelSpec::Discrete(a) = parse_model(TWO_STATE).unwrap() else { panic!("discrete") };
        assert!(a.is_centered());
        let compact: String = TWO_STATE.split_whitespace().collect();
        let b = parse_model(&compact).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash().len(), 64);
        let raw = parse_model(&TWO_STATE.replace("\"centered\": true", "\"centered\": false")).unwrap();
        assert_ne!(raw.content_hash(), a.content_hash());
    }

    #[test]
    fn file_round_trip() {
        let ModelSpec::Discrete(a) = parse_model(TWO_STATE).unwrap() else { panic!("discrete") };
        let file = map_spec_file(&a).unwrap();
        let b = file.build().unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn missing_edge_and_bad_pi_are_errors() {
        let mut doc: serde_json::Value = serde_json::from_str(TWO_STATE).unwrap();
        doc["increments"].as_array_mut().unwrap().pop();
        assert!(matches!(parse_model(&doc.to_string()), Err(Error::MissingIncrement { from: 1, to: 1 })));
        let k = r#"{"P": [[0.7, 0.3], [0.2, 0.8]], "pi": [0.5, 0.5]}"#;
        let parsed: KernelFile = serde_json::from_str(k).unwrap();
        assert!(matches!(parsed.build(), Err(Error::StationaryMismatch { .. })));
    }

    #[test]
    fn ct_file() {
        let text = r#"{"generator": [[-1, 1], [2, -2]], "reward": [0, 1]}"#;
        let ModelSpec::Continuous(ct) = parse_model(text).unwrap() else { panic!("continuous") };
        assert!((ct.pi()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(hash_ct_spec(&ct), ModelSpec::Continuous(ct.clone()).content_hash());
    }

    #[test]
    fn atomic_write_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("y.bin");
        let values = [1.5, -0.25, f64::MIN_POSITIVE];
        write_atomic(&path, &f64_column_bytes(&values)).unwrap();
        assert_eq!(read_f64_column(&fs::read(&path).unwrap()).unwrap(), values);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert_eq!(csv_string(&["a", "b"], &[vec![1.0, 0.5]]), "a,b\n1,0.5\n");
    }
}
