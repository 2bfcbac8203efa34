use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ucml_sweep::commands::{cmd_phase_diagram, rerun};
use ucml_sweep::config::{Embedded, Grid, RunConfig, SweepConfig};
use ucml_sweep::output::{read_table, Progress};

const QUIET: Progress = Progress { quiet: true };

fn sweep(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_ucml-sweep"))
        .args(args)
        .env_remove("UCML_THREADS")
        .output()
        .unwrap();
    out
}

fn ok(args: &[&str]) -> Output {
    let out = sweep(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_grid(out: &Path) -> SweepConfig {
    SweepConfig {
        alpha: Grid::List(vec![0.1, 0.5, 2.8]),
        h: Grid::List(vec![2.1, 2.5]),
        n: 12,
        max_time: 3000,
        width_limit: Some(500),
        inset_h: Some(2.2),
        out: out.to_path_buf(),
        ..SweepConfig::default()
    }
}

#[test]
fn thresholds_prints_saddle_node() {
    let out = ok(&["thresholds", "--h", "2.1"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["alpha_sn"].as_f64().unwrap() - 2.844137).abs() < 1e-5);
    assert!((report["alpha_p"][0][1].as_f64().unwrap() - 0.23067).abs() < 1e-5);
}

#[test]
fn simulate_writes_field_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("field.csv");
    let f = field.to_str().unwrap();
    ok(&[
        "--quiet",
        "simulate",
        "--alpha",
        "2.8",
        "--h",
        "2.1",
        "--seed",
        "3",
        "--max-time",
        "300",
        "--out",
        f,
    ]);
    let text = fs::read_to_string(&field).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# {\"alpha\":2.8"));
    assert!(lines.next().unwrap().starts_with("site_0,site_1"));
    // time 0 through 300
    assert_eq!(lines.count(), 301);

    let again = dir.path().join("again");
    ok(&[
        "rerun",
        "--from",
        &format!("{f}.config.json"),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(fs::read(again.join("field.csv")).unwrap(), text.as_bytes());
}

#[test]
fn ensemble_rerun_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&[
        "--quiet",
        "ensemble",
        "--alpha",
        "0.5,0.8",
        "--h",
        "2.2",
        "--n",
        "200",
        "--seed",
        "9",
        "--threads",
        "1",
        "--out",
        a.to_str().unwrap(),
    ]);
    ok(&[
        "--quiet",
        "rerun",
        "--from",
        a.join("ensemble.csv").to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--threads",
        "3",
    ]);
    for name in ["ensemble.csv", "config.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let (cfg, rows) = read_table(&a.join("ensemble.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    match cfg.run {
        RunConfig::Ensemble(c) => assert_eq!((c.n, c.master_seed), (200, 9)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn config_file_seeds_a_sweep_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    ok(&[
        "--quiet",
        "ensemble",
        "--alpha",
        "0.1",
        "--h",
        "2.5",
        "--n",
        "50",
        "--out",
        a.to_str().unwrap(),
    ]);
    let b = dir.path().join("b");
    ok(&[
        "--quiet",
        "ensemble",
        "--config",
        a.join("config.json").to_str().unwrap(),
        "--n",
        "60",
        "--out",
        b.to_str().unwrap(),
    ]);
    match Embedded::read(&b.join("ensemble.csv")).unwrap().run {
        RunConfig::Ensemble(c) => {
            assert_eq!(c.n, 60);
            assert_eq!(c.alpha, Grid::List(vec![0.1]));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn velocity_table_feeds_the_refit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    ok(&[
        "--quiet",
        "velocities",
        "--alpha",
        "2.70,2.75,2.80,2.82",
        "--h",
        "2.16",
        "--n",
        "6",
        "--max-time",
        "1500",
        "--out",
        out.to_str().unwrap(),
    ]);
    for name in [
        "leading_velocities.csv",
        "trailing_velocities.csv",
        "transition_line.csv",
        "velocities.json",
    ] {
        assert!(out.join(name).exists(), "{name}");
    }
    let fit = ok(&[
        "fit-intermittency",
        "--input",
        out.join("leading_velocities.csv").to_str().unwrap(),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&fit.stdout).unwrap();
    assert_eq!(report["points"].as_array().unwrap().len(), 4);
    assert!(report["max_abs_deviation"].as_f64().unwrap().is_finite());
}

#[test]
fn invalid_input_fails_cleanly() {
    let bad = sweep(&["ensemble", "--alpha", "1:0:0.1"]);
    assert!(!bad.status.success());
    assert!(!String::from_utf8_lossy(&bad.stderr).is_empty());
    assert!(
        !sweep(&["rerun", "--from", "/nonexistent/x.csv", "--out", "/tmp/x"])
            .status
            .success()
    );
}

#[test]
fn resume_reuses_cells_without_recomputing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_grid(dir.path());
    let first = cmd_phase_diagram(&cfg, Some(2), false, QUIET).unwrap();
    assert_eq!(first.reused, 0);
    assert_eq!(first.cells.len(), 6);
    let cells = dir.path().join("cells");
    let table = fs::read(dir.path().join("phase_diagram.csv")).unwrap();

    // an interrupted run: two cells missing
    let missing = ["h000_a001.json", "inset_a002.json"];
    let kept = fs::read(cells.join("h001_a000.json")).unwrap();
    let removed: Vec<Vec<u8>> = missing.iter().map(|m| fs::read(cells.join(m)).unwrap()).collect();
    for m in missing {
        fs::remove_file(cells.join(m)).unwrap();
    }
    let resumed = cmd_phase_diagram(&cfg, Some(1), true, QUIET).unwrap();
    assert_eq!(resumed.reused, 9 - 2);
    assert_eq!(fs::read(dir.path().join("phase_diagram.csv")).unwrap(), table);
    assert_eq!(fs::read(cells.join("h001_a000.json")).unwrap(), kept);
    for (m, bytes) in missing.iter().zip(&removed) {
        assert_eq!(&fs::read(cells.join(m)).unwrap(), bytes);
    }

    // a marked stored value comes back untouched, so it was not recomputed
    let path = cells.join("h001_a001.json");
    let mut stored: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    stored["outcome"]["frac_puff"] = serde_json::json!(0.125);
    fs::write(&path, serde_json::to_string(&stored).unwrap()).unwrap();
    let marked = cmd_phase_diagram(&cfg, None, true, QUIET).unwrap();
    assert_eq!(marked.reused, 9);
    // cells are h-major
    assert_eq!(marked.cells[4].stats().unwrap().frac_puff, 0.125);
}

#[test]
fn resume_refuses_a_different_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_grid(dir.path());
    cmd_phase_diagram(&cfg, None, false, QUIET).unwrap();
    let other = SweepConfig { n: 13, ..cfg };
    assert!(cmd_phase_diagram(&other, None, true, QUIET).is_err());
}

#[test]
fn phase_diagram_rerun_is_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    cmd_phase_diagram(&small_grid(&a), Some(1), false, QUIET).unwrap();
    rerun(&a.join("overlay.csv"), &b, Some(4), QUIET).unwrap();
    for name in [
        "phase_diagram.csv",
        "overlay.csv",
        "inset.csv",
        "config.json",
        "cells/h001_a002.json",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}
