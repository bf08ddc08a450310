use std::path::Path;
use std::process::{Command, Output};

fn maplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maplab")).args(args).env_remove("MAPLAB_THREADS").output().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fixtures_list_prints_registry() {
    let out = maplab(&["fixtures", "list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().collect();
    assert_eq!(names, maplab::fixtures::NAMES);
}

#[test]
fn usage_errors_exit_two_with_json_message() {
    for args in [&["--no-such-flag"][..], &["verify-be", "--fixture", "two_state"], &["frobnicate"]] {
        let out = maplab(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let msg: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(msg["error"], "usage");
    }
}

#[test]
fn model_errors_exit_two_with_kind() {
    let out = maplab(&["verify-clt", "--fixture", "nope", "--n-list", "8", "--paths", "10", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let msg: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(msg["error"], "unknown_fixture");

    let out = maplab(&["verify-llt", "--fixture", "lattice_pm1", "--n-list", "64", "--paths", "100", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let msg: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(msg["error"], "lattice_spec");
}

#[test]
fn reports_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("be{threads}.json"));
        let csv = dir.path().join(format!("be{threads}.csv"));
        let status = maplab(&[
            "--threads", threads, "verify-be", "--fixture", "two_state", "--n-list", "64,256", "--paths", "4000",
            "--seed", "7", "--out", out.to_str().unwrap(), "--csv", csv.to_str().unwrap(),
        ]);
        assert!(status.status.code().unwrap() <= 1);
        bytes.push((std::fs::read(&out).unwrap(), std::fs::read(&csv).unwrap()));
    }
    assert_eq!(bytes[0], bytes[1]);
    let report: serde_json::Value = serde_json::from_slice(&bytes[0].0).unwrap();
    for key in ["verdict", "records", "seeds", "spec_hash", "config"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["records"].as_array().unwrap().len(), 2);
    assert_eq!(report["config"]["n_list"], serde_json::json!([64, 256]));
    let csv = String::from_utf8(bytes[0].1.clone()).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("n,sample_size,"));
}

#[test]
fn verdict_maps_to_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let run = maplab(&[
        "verify-clt", "--fixture", "two_state", "--n-list", "256,1024", "--paths", "20000", "--seed", "3", "--out",
        out.to_str().unwrap(),
    ]);
    let report = json(&out);
    let expected = if report["verdict"].as_bool().unwrap() { 0 } else { 1 };
    assert_eq!(run.status.code(), Some(expected));
    assert_eq!(expected, 0);
}

#[test]
fn spec_file_and_fixture_agree() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    let shown = maplab(&["fixtures", "show", "birth_death_5"]);
    assert_eq!(shown.status.code(), Some(0));
    std::fs::write(&spec, &shown.stdout).unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    maplab(&["analyze", "--fixture", "birth_death_5", "--points", "5", "--out", a.to_str().unwrap()]);
    maplab(&["analyze", "--spec", spec.to_str().unwrap(), "--points", "5", "--out", b.to_str().unwrap()]);
    let (a, b) = (json(&a), json(&b));
    assert_eq!(a["spec_hash"], b["spec_hash"]);
    assert_eq!(a["summary"], b["summary"]);
    let s2 = a["summary"]["spectral_summary"]["sigma2"].as_f64().unwrap();
    assert!((s2 - 29.2756476495303).abs() < 1e-5);
}

#[test]
fn simulate_writes_binary_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("y.bin");
    let run = maplab(&[
        "simulate", "--fixture", "two_state", "--n", "10", "--paths", "500", "--seed", "11", "--init", "[1, 0]", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(0));
    let ys = maplab::io::read_f64_column(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(ys.len(), 500);
    let direct = maplab::montecarlo::simulate_discrete(
        &maplab::fixtures::map_fixture("two_state").unwrap(),
        10,
        500,
        11,
        Some(&[1.0, 0.0]),
    )
    .unwrap();
    assert_eq!(ys, direct.terminal_y);
    let side = json(&dir.path().join("y.bin.json"));
    assert_eq!(side["n_paths"], 500);
    assert_eq!(side["data"]["byte_order"], "little");
    assert_eq!(side["spec_hash"], direct.spec_id);

    let ct = dir.path().join("ct.bin");
    let run = maplab(&["simulate", "--fixture", "ct_two_state", "--n", "3", "--paths", "5", "--seed", "1", "--out", ct.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn scan_lambda_emits_csv() {
    let out = maplab(&["scan-lambda", "--fixture", "two_state", "--zmax", "0.2", "--points", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("zeta,re_lambda,im_lambda,abs_lambda,kappa,separation"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 9);
    let origin = rows.iter().find(|r| r[0] == 0.0).unwrap();
    assert!((origin[1] - 1.0).abs() < 1e-12 && origin[3] <= 1.0 + 1e-12);
    assert!(rows.iter().all(|r| r[3] <= 1.0 + 1e-12));
}

#[test]
fn mixing_bound_and_ct_and_mestimate_run() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    let run = maplab(&["mixing-bound", "--fixture", "two_state", "--lags", "1,2,3", "--paths", "5000", "--seed", "2", "--out", m.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0));
    let report = json(&m);
    let bounds = report["summary"]["mixing_bounds"]["bounds"].as_array().unwrap();
    assert!((bounds[1]["bound"].as_f64().unwrap() - 0.5).abs() < 1e-12);

    let c = dir.path().join("c.json");
    let run = maplab(&["verify-ct", "--fixture", "ct_two_state", "--t-list", "16,64.5", "--paths", "5000", "--seed", "2", "--out", c.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0));
    assert!((json(&c)["summary"]["sigma2"].as_f64().unwrap() - 4.0 / 27.0).abs() < 1e-9);

    let e = dir.path().join("e.json");
    let run = maplab(&["mestimate", "--fixture", "mean_contrast_problem", "--n-list", "64,256", "--reps", "2000", "--seed", "5", "--out", e.to_str().unwrap()]);
    assert!(run.status.code().unwrap() <= 1);
    let report = json(&e);
    assert_eq!(report["records"].as_array().unwrap().len(), 10);
    assert_eq!(report["thetas"].as_array().unwrap().len(), 5);
}
