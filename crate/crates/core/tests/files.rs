//! Model files on disk.

use maplab::fixtures::{ct_fixture, map_fixture};
use maplab::io::{self, CtSpecFile, ModelSpec};
use maplab::Error;

#[test]
fn documented_map_format_loads() {
    let text = r#"{
        "kernel": { "states": ["a", "b"], "P": [[0.7, 0.3], [0.2, 0.8]] },
        "d": 1,
        "increments": [
            {"from": 0, "to": 0, "kind": "deterministic", "value": [0.0]},
            {"from": 0, "to": 1, "kind": "deterministic", "value": [1.0]},
            {"from": 1, "to": 0, "kind": "deterministic", "value": [0.0]},
            {"from": 1, "to": 1, "kind": "deterministic", "value": [1.0]}
        ],
        "centered": true
    }"#;
    let ModelSpec::Discrete(spec) = io::parse_model(text).unwrap() else { panic!("discrete") };
    let fixture = map_fixture("two_state").unwrap();
    assert!((spec.offset()[0] - 0.6).abs() < 1e-12);
    assert!((spec.fourier_matrix(&[0.3]) - fixture.fourier_matrix(&[0.3])).norm() < 1e-14);
}

#[test]
fn kernel_file_checks_supplied_pi() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.json");
    std::fs::write(&path, r#"{"P": [[0.7, 0.3], [0.2, 0.8]], "pi": [0.4, 0.6]}"#).unwrap();
    let pi = io::load_kernel(&path).unwrap().pi().to_vec();
    assert!((pi[0] - 0.4).abs() < 1e-12 && (pi[1] - 0.6).abs() < 1e-12);
    std::fs::write(&path, r#"{"P": [[0.7, 0.3], [0.2, 0.8]], "pi": [0.41, 0.59]}"#).unwrap();
    assert!(matches!(io::load_kernel(&path), Err(Error::StationaryMismatch { .. })));
    std::fs::write(&path, r#"{"P": [[0.7, 0.4], [0.2, 0.8]]}"#).unwrap();
    assert!(matches!(io::load_kernel(&path), Err(Error::NotStochastic { .. })));
    std::fs::write(&path, r#"{"P": [[1.0]], "extra": 1}"#).unwrap();
    assert!(matches!(io::load_kernel(&path), Err(Error::Json(_))));
}

#[test]
fn continuous_files_round_trip() {
    let ct = ct_fixture("ct_two_state").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ct.json");
    io::write_json(&path, &CtSpecFile::from_spec(&ct)).unwrap();
    let ModelSpec::Continuous(back) = io::load_model(&path).unwrap() else { panic!("continuous") };
    assert_eq!(io::hash_ct_spec(&back), io::hash_ct_spec(&ct));
    assert_eq!(back.generator(), ct.generator());
}

#[test]
fn atomic_writes_leave_no_temporaries() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.bin");
    let values = [1.5, -0.0, f64::MIN_POSITIVE, 1e300];
    io::write_atomic(&path, &io::f64_column_bytes(&values)).unwrap();
    io::write_atomic(&path, &io::f64_column_bytes(&values[..2])).unwrap();
    let back = io::read_f64_column(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back[1].to_bits(), (-0.0f64).to_bits());
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 1);
    assert!(io::read_f64_column(&[0u8; 7]).is_err());
}

#[test]
fn csv_uses_round_trip_floats() {
    let text = io::csv_string(&["a", "b"], &[vec![0.1, 1.0 / 3.0]]);
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(row, vec![0.1, 1.0 / 3.0]);
}
