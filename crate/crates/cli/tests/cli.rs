//! End-to-end checks of the CLI dispatch: exit codes, output files, and the
//! documented JSON/CSV shapes.

use disloc_cli::dispatch;
use std::fs;
use std::path::Path;

fn run(args: &[&str]) -> i32 {
    dispatch(std::iter::once("disloc").chain(args.iter().copied()))
}

fn write_tiny_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(
        &path,
        r#"{
            "domain": {"P": 5.0, "N": 20},
            "smoothing": {"M": 10},
            "time": {"dt": 0.05, "T": 0.5},
            "output": {"every_k_steps": 5}
        }"#,
    )
    .unwrap();
    path
}

#[test]
fn kernel_inspect_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k");
    let code = run(&[
        "kernel-inspect",
        "--P",
        "10",
        "--M",
        "16",
        "--N",
        "64",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("kernel_report.json")).unwrap()).unwrap();
    assert_eq!(report["M"], serde_json::json!(16));
    assert_eq!(report["coeffs"].as_array().unwrap().len(), 31); // 2M-1
    assert_eq!(report["samples"].as_array().unwrap().len(), 128); // 2N
    assert!(report["max_coeff"].as_f64().unwrap() <= 1e-12);
    assert!(report["l1_discrete"].as_f64().unwrap() <= 10.0 + 1e-9);
    let csv = fs::read_to_string(out.join("kernel_samples.csv")).unwrap();
    assert!(csv.starts_with("x_j,sigma_j"));
    assert_eq!(csv.lines().count(), 129);
    // first sample row is the node at x = -P
    assert!(csv.lines().nth(1).unwrap().starts_with("-10.0,"));
}

#[test]
fn simulate_writes_snapshots_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out = dir.path().join("run");
    let code = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert_eq!(code, 0);
    assert!(out.join("snapshot_00000000.csv").exists());
    assert!(out.join("snapshot_00000010.csv").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["result"]["steps"], serde_json::json!(10));
    assert_eq!(manifest["seed"], serde_json::json!(7));
    assert_eq!(manifest["config"]["domain"]["N"], serde_json::json!(20));
}

#[test]
fn bad_config_exits_2_with_violation_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"domain": {"P": 0.2, "N": 0}, "nope": 1}"#).unwrap();
    let code = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    // missing file is also a config error
    let code = run(&["simulate", "--config", "/nonexistent/path.json"]);
    assert_eq!(code, 2);
    // unknown experiment name
    let code = run(&["experiment", "run", "bogus"]);
    assert_eq!(code, 2);
    // malformed sweep subset
    let code = run(&["experiment", "run", "table2", "--subset", "10,abc"]);
    assert_eq!(code, 2);
}

#[test]
fn entropy_report_emits_per_step_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out = dir.path().join("er");
    let code = run(&[
        "entropy-report",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(out.join("entropy_report.csv")).unwrap();
    assert!(csv.starts_with("n,t,tv,entropy,sup_norm,min_grad,fp_iters,contraction"));
    assert_eq!(csv.lines().count(), 12); // header + 11 time levels
}

#[test]
fn out_root_env_prefixes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    // The env var is process-global; serialize this test against others by
    // using a unique relative dir under the root.
    std::env::set_var("DISLOC_OUT_ROOT", dir.path());
    let code = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out-dir", "rooted"]);
    std::env::remove_var("DISLOC_OUT_ROOT");
    assert_eq!(code, 0);
    assert!(dir.path().join("rooted/run_manifest.json").exists());
}

#[test]
fn refinement_experiment_runs_on_tiny_base() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("base.json");
    fs::write(
        &cfg,
        r#"{
            "domain": {"P": 5.0, "N": 10},
            "smoothing": {"M": 5},
            "time": {"dt": 0.05, "T": 0.25},
            "output": {"every_k_steps": 1}
        }"#,
    )
    .unwrap();
    let out = dir.path().join("exp");
    let code = run(&[
        "experiment",
        "run",
        "refinement",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let summary: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(out.join("refinement/summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["pass"], serde_json::json!(true));
    assert_eq!(summary["gaps"].as_array().unwrap().len(), 2);
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]), 0);
}
