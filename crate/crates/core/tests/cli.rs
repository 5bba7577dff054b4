//! End-to-end tests of the command-line binary: every subcommand, the exit
//! code contract, and output determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_dobkit");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("DOB_LOG_LEVEL")
        .output()
        .expect("binary should run")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout should be JSON: {e}\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn base_config() -> String {
    r#"{
        "plant": {"tf": {"num": [2.4, 1.5], "den": [1.4, 2.6, 3.5, 1.0]}},
        "nominal": {"num": [2.0, 1.0], "den": [1.0, 2.0, 3.0, 1.0]},
        "qfilter": {"tau": 0.05, "mu": 2, "a": [2.0, 2.0], "c": [2.0, 0.0]},
        "controller": {"num": [4.0, 4.0], "den": [4.0, 1.0]},
        "disturbance": {"kind": "sinusoid", "amplitude": 0.5, "omega": 2.0},
        "reference": {"kind": "constant", "level": 1.0},
        "horizon": 4.0,
        "samples": 400
    }"#
    .to_string()
}

#[test]
fn normalize_reports_structure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", &base_config());
    let out = run(&["normalize", "--config", &cfg]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["nu"], 2);
    assert_eq!(v["m"], 1);
    assert_eq!(v["is_minimum_phase"], true);
    let zeros = v["zeros"].as_array().unwrap();
    assert_eq!(zeros.len(), 1);
    assert!((zeros[0]["re"].as_f64().unwrap() + 1.6).abs() < 1e-9);
}

#[test]
fn design_q_emits_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        r#"{
            "nominal": {"num": [2.0, 1.0], "den": [1.0, 2.0, 3.0, 1.0]},
            "qfilter": {"design": {"tau": 0.01, "g_min": 0.5, "g_max": 2.0}}
        }"#,
    );
    let out = run(&["design-q", "--config", &cfg]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["mu"], 2);
    assert!(v["kbar"].as_f64().unwrap() > 0.0);
    assert_eq!(v["condition_c"]["ok"], true);
    assert_eq!(v["a"].as_array().unwrap().len(), 2);
}

#[test]
fn check_stability_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.json", &base_config());
    let out = run(&["check-stability", "--config", &good, "--tau", "0.1,0.01"]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = stdout_json(&out);
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["verdict"], "robustly-stable-for-small-tau");

    // A right-half-plane plant zero breaks the minimum-phase requirement.
    let bad_body = base_config().replace("[2.4, 1.5]", "[-1.5, 1.5]");
    let bad = write_config(dir.path(), "bad.json", &bad_body);
    let out = run(&["check-stability", "--config", &bad]);
    assert_eq!(out.status.code(), Some(5));
    let v = stdout_json(&out);
    assert_eq!(v[0]["verdict"], "unstable-limit");
}

#[test]
fn simulate_writes_trace_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", &base_config());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = stdout_json(&out);
    assert_eq!(v["diverged"], false);
    assert!(v["metrics"]["sup_dev"].as_f64().unwrap().is_finite());
    let trace = fs::read_to_string(v["trace"].as_str().unwrap()).unwrap();
    let header = trace.lines().next().unwrap();
    assert!(header.starts_with("t,y,y_nominal,u,u_desired,u_sat_active,x1"));
    assert_eq!(trace.lines().count(), 401);
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let body = base_config().replace(
        "\"horizon\": 4.0",
        "\"plant_spread\": 0.3,\n        \"horizon\": 4.0",
    );
    let cfg = write_config(dir.path(), "cfg.json", &body);
    let mut csvs = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        let out = run(&[
            "simulate",
            "--config",
            &cfg,
            "--seed",
            "7",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        let v = stdout_json(&out);
        csvs.push(fs::read(v["trace"].as_str().unwrap()).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn sweep_writes_summary_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", &base_config());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "sweep",
        "--config",
        &cfg,
        "--tau",
        "0.1,0.05,0.02",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = stdout_json(&out);
    assert_eq!(v["runs"].as_array().unwrap().len(), 3);
    let summary = fs::read_to_string(v["summary"].as_str().unwrap()).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        "tau,sup_dev,sup_dev_post,u_tracking,steady_state_err"
    );
    assert_eq!(lines.count(), 3);
    for run in v["runs"].as_array().unwrap() {
        assert!(Path::new(run["trace"].as_str().unwrap()).exists());
    }
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", "{ not json");
    let out = run(&["normalize", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["normalize"]);
    assert_eq!(out.status.code(), Some(2));

    let unknown = write_config(dir.path(), "unknown.json", r#"{"plants": {}}"#);
    let out = run(&["normalize", "--config", &unknown]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_override_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", &base_config());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        &cfg,
        "--solver",
        "rk4",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}
