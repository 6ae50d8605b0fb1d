use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ee_traj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ee-traj")).args(args).output().expect("binary runs")
}

fn run_small_case(dir: &Path) {
    let out = ee_traj(&["run-case", "--case", "3", "--duration", "20", "--trace", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    for mode in ["max_ee", "max_throughput", "max_ee_nojam"] {
        assert!(table.contains(mode), "{table}");
    }
}

#[test]
fn run_case_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    run_small_case(dir.path());
    for f in ["scenario.json", "initial.csv", "metrics.csv"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    for mode in ["max_ee", "max_throughput", "max_ee_nojam"] {
        for f in ["trajectory.csv", "convergence.csv", "newton_trace.csv"] {
            assert!(dir.path().join(mode).join(f).is_file(), "{mode}/{f} missing");
        }
    }
    let traj = fs::read_to_string(dir.path().join("max_ee/trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 41);
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(metrics.lines().next().unwrap().contains("ee_kbits_per_J"));
}

#[test]
fn run_case_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = ee_traj(&[
            "run-case",
            "--case",
            "4",
            "--duration",
            "15",
            "--mode",
            "max-ee",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let read = |d: &Path| fs::read(d.join("max_ee/trajectory.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn scenario_file_can_be_replayed() {
    let dir = tempfile::tempdir().unwrap();
    run_small_case(dir.path());
    let again = dir.path().join("again");
    let out = ee_traj(&[
        "run-case",
        "--scenario",
        dir.path().join("scenario.json").to_str().unwrap(),
        "--mode",
        "max-throughput",
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read(dir.path().join("max_throughput/trajectory.csv")).unwrap(),
        fs::read(again.join("max_throughput/trajectory.csv")).unwrap()
    );
}

#[test]
fn unknown_case_is_a_usage_error() {
    let out = ee_traj(&["run-case", "--case", "9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--case"));
}

#[test]
fn missing_scenario_file_fails_cleanly() {
    let out = ee_traj(&["run-case", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn plot_data_emits_every_kind() {
    let dir = tempfile::tempdir().unwrap();
    run_small_case(dir.path());
    for kind in ["trajectory_xy", "speed_profile", "ee_bars", "convergence"] {
        let out = ee_traj(&["plot-data", "--from", dir.path().to_str().unwrap(), "--kind", kind, "--label", "c3"]);
        assert!(out.status.success(), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
        let text = fs::read_to_string(dir.path().join(format!("{kind}.csv"))).unwrap();
        assert!(text.lines().count() > 1, "{kind} is empty");
        assert!(text.lines().nth(1).unwrap().starts_with("c3,"), "{kind}: {text}");
    }
    let bad = ee_traj(&["plot-data", "--from", dir.path().to_str().unwrap(), "--kind", "histogram"]);
    assert!(!bad.status.success());
}

#[test]
fn tiny_sweep_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = ee_traj(&[
        "run-sweep",
        "--variable",
        "m",
        "--values",
        "1,2",
        "--trials",
        "1",
        "--duration",
        "15",
        "--case",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs = fs::read_to_string(dir.path().join("sweep_runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 2 * 3);
    assert!(dir.path().join("sweep_summary.csv").is_file());
}
