//! End-to-end runs of the `dimlab` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn dimlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dimlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn artifact(dir: &Path, prefix: &str, ext: &str) -> PathBuf {
    let mut found: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            let name = p.file_name().unwrap().to_string_lossy();
            name.starts_with(prefix) && name.ends_with(ext)
        })
        .collect();
    assert_eq!(found.len(), 1, "expected one {prefix}*{ext} in {}", dir.display());
    found.pop().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn discrete_id_config(out_dir: &Path) -> Value {
    json!({
        "task": "id",
        "spec": {"kind": "iid_discrete", "discrete_pmf": [[0.1, 0.4], [0.35, 0.3], [0.6, 0.2], [0.85, 0.1]]},
        "n": 100000,
        "seed": 4,
        "b_grid": [4, 6, 8, 10],
        "output_dir": out_dir,
    })
}

#[test]
fn missing_b_grid_exits_one_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = discrete_id_config(dir.path());
    cfg.as_object_mut().unwrap().remove("b_grid");
    let path = write_config(dir.path(), "c.json", &cfg);
    let out = dimlab(&["id", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("b_grid"), "{}", stderr(&out));
}

#[test]
fn malformed_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(
        dimlab(&["id", "--config", bad.to_str().unwrap()]).status.code(),
        Some(1)
    );
    assert_eq!(
        dimlab(&["id", "--config", "/nonexistent/c.json"]).status.code(),
        Some(1)
    );

    let path = write_config(dir.path(), "c.json", &discrete_id_config(dir.path()));
    let out = dimlab(&["rd", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "task mismatch: {}", stderr(&out));
    let out = dimlab(&["id", "--config", path.to_str().unwrap(), "--spec.p=2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains('p'));
}

#[test]
fn discrete_source_id_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "c.json", &discrete_id_config(dir.path()));
    let out = dimlab(&["id", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let est: Value =
        serde_json::from_str(&fs::read_to_string(artifact(dir.path(), "id_", ".json")).unwrap()).unwrap();
    assert!(est["value"].as_f64().unwrap() < 0.02, "{est}");
    let csv = fs::read_to_string(artifact(dir.path(), "id_", ".csv")).unwrap();
    assert!(csv.starts_with("k,b,scheme,H_conditional_bits,support_seen,total,estimator\n"));
    assert_eq!(csv.lines().count(), 5);
    assert!(String::from_utf8_lossy(&out.stdout).contains("id: d_0 ="));
}

#[test]
fn rdd_of_gaussian_oracle_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "task": "rdd",
        "oracle": {
            "curve": {"kind": "gaussian_rd", "params": [1.0]},
            "d_grid": {"start_exponent": -6.0, "stop_exponent": -1.0, "count": 26}
        },
        "output_dir": dir.path(),
    });
    let path = write_config(dir.path(), "c.json", &cfg);
    let out = dimlab(&["rdd", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(artifact(dir.path(), "rdd_", ".json")).unwrap()).unwrap();
    assert!((report["value"].as_f64().unwrap() - 1.0).abs() < 1e-9, "{report}");

    // The exported curve fits back to the same value.
    let curve_csv = artifact(dir.path(), "rdd_", ".csv");
    let sub = dir.path().join("refit");
    let cfg = json!({"task": "rdd", "curve_csv": curve_csv, "output_dir": sub});
    let path = write_config(dir.path(), "c2.json", &cfg);
    let out = dimlab(&["rdd", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let refit: Value =
        serde_json::from_str(&fs::read_to_string(artifact(&sub, "rdd_", ".json")).unwrap()).unwrap();
    assert_eq!(refit["value"], report["value"]);
}

#[test]
fn starved_solver_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "task": "rd",
        "spec": {"kind": "iid_continuous",
                 "continuous": {"family": "uniform", "support_low": 0.0, "support_high": 1.0}},
        "N": 128,
        "s_grid": {"start_exponent": 3.0, "stop_exponent": 1.0, "count": 5},
        "max_iter": 2,
        "output_dir": dir.path(),
    });
    let path = write_config(dir.path(), "c.json", &cfg);
    let out = dimlab(&["rd", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("gap"));
    // The curve is still written for inspection.
    assert!(artifact(dir.path(), "rd_", ".csv").exists());

    let out = dimlab(&["rd", "--config", path.to_str().unwrap(), "--max_iter=5000"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn artifacts_are_deterministic_and_named_by_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "task": "simulate",
        "spec": {"kind": "piecewise_constant_markov", "p": 0.2,
                 "continuous": {"family": "uniform", "support_low": 0.0, "support_high": 1.0}},
        "n": 5000,
        "seed": 21,
    });
    let path = write_config(dir.path(), "c.json", &cfg);
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let arg = format!("--output_dir={}", out_dir.display());
        let out = dimlab(&["simulate", "--config", path.to_str().unwrap(), &arg]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let csv = artifact(&out_dir, "simulate_", ".csv");
        let json = artifact(&out_dir, "simulate_", ".json");
        bytes.push((
            csv.file_name().unwrap().to_owned(),
            fs::read(csv).unwrap(),
            fs::read(json).unwrap(),
        ));
    }
    // The output directory is part of the config, so names differ only if it
    // does; contents must match exactly.
    assert_eq!(bytes[0].1, bytes[1].1);
    assert_eq!(bytes[0].2, bytes[1].2);

    let out_dir = dir.path().join("c");
    let arg = format!("--output_dir={}", out_dir.display());
    dimlab(&["simulate", "--config", path.to_str().unwrap(), &arg, "--seed=22"]);
    let other = fs::read(artifact(&out_dir, "simulate_", ".csv")).unwrap();
    assert_ne!(other, bytes[0].1);
}

#[test]
fn same_config_same_file_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = discrete_id_config(dir.path());
    let path = write_config(dir.path(), "c.json", &cfg);
    for _ in 0..2 {
        assert_eq!(
            dimlab(&["id", "--config", path.to_str().unwrap()]).status.code(),
            Some(0)
        );
    }
    assert_eq!(
        fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .file_name()
                    .to_string_lossy()
                    .starts_with("id_")
            })
            .count(),
        2
    );
}
