//! End-to-end runs of the `landau` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn flat_torus() -> PathBuf {
    configs().join("models/flat_torus.json")
}

fn landau(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_landau"))
        .args(args)
        .env_remove("LANDAU_THREADS")
        .output()
        .expect("spawn landau")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn write_experiment(dir: &Path, body: Value) -> PathBuf {
    let path = dir.join("experiment.json");
    std::fs::write(&path, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn predict_gives_the_landau_degeneracy() {
    let out = landau(&[
        "predict",
        "--config",
        s(&flat_torus()),
        "--p",
        "4",
        "--interval",
        "0.5:1.5",
    ]);
    let v = stdout_json(&out);
    let predicted = v["weyl"]["value"].as_f64().unwrap();
    assert!((predicted - 4.0).abs() < 1e-12, "{predicted}");
    assert_eq!(v["bands"]["bands"][0]["lo"], json!(1.0));
}

#[test]
fn count_reads_back_an_assembled_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let torus = flat_torus();
    let direct = landau(&[
        "count",
        "--config",
        s(&torus),
        "--p",
        "4",
        "--grid",
        "48",
        "--interval",
        "0.5:1.5",
    ]);
    let direct = stdout_json(&direct);
    assert_eq!(direct["count"], json!(4));

    let out = landau(&[
        "assemble",
        "--config",
        s(&torus),
        "--p",
        "4",
        "--grid",
        "48",
        "--out",
        s(dir.path()),
    ]);
    assert!(out.status.success());
    let mtx = dir.path().join("operator_p4.mtx");
    assert!(mtx.exists());
    let text = std::fs::read_to_string(&mtx).unwrap();
    assert!(text.starts_with("%%MatrixMarket matrix coordinate complex hermitian"));

    let via_file = stdout_json(&landau(&["count", "--matrix", s(&mtx), "--interval", "0.5:1.5"]));
    assert_eq!(via_file["count"], direct["count"]);
}

#[test]
fn eigs_returns_converged_pairs() {
    let out = landau(&[
        "eigs",
        "--config",
        s(&flat_torus()),
        "--p",
        "4",
        "--grid",
        "48",
        "--interval",
        "0.5:1.5",
    ]);
    let v = stdout_json(&out);
    let pairs = v["eigenpairs"].as_array().expect("eigenpairs");
    assert_eq!(pairs.len(), 4);
    for pair in pairs {
        let value = pair["value"].as_f64().unwrap();
        assert!((0.5..1.5).contains(&value));
        assert!(pair["residual"].as_f64().unwrap() <= 1e-8);
    }
}

#[test]
fn sweep_writes_report_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_experiment(
        dir.path(),
        json!({
            "model": flat_torus(),
            "grid": {"cells": [48, 48]},
            "p": [2, 4],
            "intervals": [[0.5, 1.5]],
            "checks": ["weyl"],
            "prediction_cells": 64,
        }),
    );
    let out_dir = dir.path().join("out");
    let out = landau(&["sweep", "--config", s(&config), "--out", s(&out_dir)]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS complete"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    let counts: Vec<u64> = report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["weyl"][0]["measured"].as_u64().unwrap())
        .collect();
    assert_eq!(counts, [2, 4]);
    let rows = std::fs::read_to_string(out_dir.join("rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 3);
    assert!(out_dir.join("fits.csv").exists());
}

#[test]
fn under_resolved_rows_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_experiment(
        dir.path(),
        json!({
            "model": flat_torus(),
            "grid": {"cells": [40, 40]},
            "p": [2, 4],
            "intervals": [[0.5, 1.5]],
            "checks": ["weyl"],
            "prediction_cells": 64,
        }),
    );
    let out = landau(&["sweep", "--config", s(&config)]);
    assert_eq!(out.status.code(), Some(2));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["incomplete"], json!(true));
    assert_eq!(report["rows"][0]["failures"], json!([]));
    assert_eq!(report["rows"][1]["failures"][0]["exit_code"], json!(2));
}

#[test]
fn solver_failures_exit_with_solver_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_experiment(
        dir.path(),
        json!({
            "model": flat_torus(),
            "grid": {"cells": [48, 48]},
            "p": [4],
            "intervals": [[0.5, 1.5]],
            "checks": [],
            "eigs": {"tolerance": 1e-30, "max_iterations": 1},
        }),
    );
    let out = landau(&["eigs", "--config", s(&config)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn bad_input_exits_with_validation_code() {
    let out = landau(&[
        "count",
        "--config",
        s(&flat_torus()),
        "--p",
        "4",
        "--grid",
        "24",
        "--interval",
        "0.5:1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("under-resolved"));

    let out = landau(&[
        "count",
        "--config",
        s(&flat_torus()),
        "--p",
        "4",
        "--interval",
        "1.5:0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let config = write_experiment(dir.path(), json!({"model": flat_torus(), "p": [4, 2]}));
    let out = landau(&["sweep", "--config", s(&config)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let torus = flat_torus();
    let args = [
        "count",
        "--config",
        s(&torus),
        "--p",
        "2",
        "--grid",
        "32",
        "--interval",
        "0.5:1.5",
    ];
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_landau"))
            .args(args)
            .env("LANDAU_THREADS", threads)
            .output()
            .unwrap()
    };
    let ok = run("2");
    assert_eq!(stdout_json(&ok)["count"], json!(2));
    for bad in ["0", "many"] {
        let out = run(bad);
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains("LANDAU_THREADS"));
    }
}

#[test]
fn ldos_matches_the_flat_density() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_experiment(
        dir.path(),
        json!({
            "model": flat_torus(),
            "grid": {"cells": [48, 48]},
            "p": [4],
            "phi": [{"alpha": 0.5, "beta": 1.5}],
            "checks": [],
            "prediction_cells": 64,
        }),
    );
    let out = landau(&[
        "ldos",
        "--config",
        s(&config),
        "--node",
        "0.5,0.5",
        "--node",
        "1.25,2.0",
    ]);
    let v = stdout_json(&out);
    let row = &v["rows"][0][1];
    assert_eq!(row["nodes"].as_array().unwrap().len(), 2);
    assert!(row["mean_deviation"].as_f64().unwrap() < 0.05, "{row}");
}

#[test]
fn shipped_configs_load() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let v = stdout_json(&landau(&["predict", "--config", s(&path)]));
            assert!(v["validation"].is_object(), "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
