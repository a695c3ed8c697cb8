//! Black-box checks of the command-line binary: exit codes, messages, and
//! the artifact layout each subcommand leaves behind.

use std::path::Path;
use std::process::{Command, Output};

fn rampsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rampsim"))
        .args(args)
        .output()
        .expect("binary must spawn")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A deliberately small scenario so run/compare/sweep finish instantly.
fn write_tiny_scenario(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.json");
    std::fs::write(
        &path,
        r#"{
            "name": "tiny",
            "horizon_s": 600.0,
            "dt_s": 1.0,
            "segments": [
                {"length_km": 1.0, "lanes": 3,
                 "diagram": {"type": "may", "v_f": 100.0, "a": 2.0, "rho_c": 109.0}}
            ],
            "ramps": [
                {"merge_segment": 1, "demand_vpm": [[0.0, 10.0], [600.0, 10.0]]}
            ],
            "mainline_inflow_vpm": [[0.0, 60.0], [600.0, 60.0]],
            "controller": {"kind": "alinea"}
        }"#,
    )
    .expect("scenario file must write");
    path
}

#[test]
fn validate_accepts_the_bundled_scenarios() {
    for name in ["paper-network", "paper-incident"] {
        let out = rampsim(&["validate", name]);
        assert!(out.status.success(), "stderr: {}", stderr(&out));
        let text = stdout(&out);
        assert!(text.starts_with("ok:"), "unexpected output: {text}");
        assert!(text.contains(name));
    }
}

#[test]
fn show_effective_prints_the_filled_in_defaults() {
    let out = rampsim(&["validate", "paper-network", "--show-effective"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    // Values the scenario file never spells out must still be visible.
    for key in [
        "\"dt_s\"",
        "\"vehicle_size_km\"",
        "\"noise_to_pct\"",
        "\"window_cycles\"",
        "\"queue_override_m\"",
        "\"sat_rate_vpm\"",
    ] {
        assert!(text.contains(key), "effective config is missing {key}");
    }
}

#[test]
fn missing_scenario_reports_path_and_bundled_names() {
    let out = rampsim(&["validate", "/no/such/scenario.json"]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("/no/such/scenario.json"), "stderr: {err}");
    assert!(err.contains("paper-network"), "stderr: {err}");
}

#[test]
fn unknown_controller_kind_lists_the_legal_ones() {
    let out = rampsim(&["run", "paper-network", "--controller", "zzz"]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("none, alinea, ip, pi"), "stderr: {err}");
}

#[test]
fn run_writes_artifacts_to_the_requested_directory() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_tiny_scenario(dir.path());
    let out_dir = dir.path().join("artifacts");

    let out = rampsim(&["run", scenario.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    for name in ["scenario.json", "log.csv", "metrics.txt", "metrics.csv"] {
        assert!(out_dir.join(name).is_file(), "missing {name}");
    }
    assert!(out_dir.join("plots").is_dir());
    let text = stdout(&out);
    assert!(text.contains("TTS"), "metrics table not printed: {text}");
    assert!(text.contains("wrote"));
}

#[test]
fn compare_runs_each_controller_and_tabulates() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_tiny_scenario(dir.path());
    let out_dir = dir.path().join("cmp");

    let out = rampsim(&[
        "compare",
        scenario.to_str().unwrap(),
        "--controllers",
        "none,alinea",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(out_dir.join("comparison.csv").is_file());
    for kind in ["none", "alinea"] {
        assert!(out_dir.join(kind).join("log.csv").is_file(), "missing {kind} run");
    }
    let text = stdout(&out);
    assert!(text.contains("none") && text.contains("alinea"), "table: {text}");
}

#[test]
fn sweep_runs_once_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_tiny_scenario(dir.path());
    let out_dir = dir.path().join("sweep");

    let out = rampsim(&[
        "sweep",
        scenario.to_str().unwrap(),
        "--param",
        "controller.setpoint.initial_pct",
        "--values",
        "12,16",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("2 runs"));
    assert!(out_dir.join("sweep.csv").is_file());
}
