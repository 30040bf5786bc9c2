//! Command-line surface: artifacts, manifests, determinism and diagnostics.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn mmqed(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmqed")).args(args).arg("--out").arg(dir).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = mmqed(dir, args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn spectroscopy_without_coupling_is_straight_lines() {
    let d = TempDir::new().unwrap();
    ok(
        d.path(),
        &["spectroscopy", "--set", "device.g_q1f=0", "--set", "device.g_q2f=0", "--set", "spectroscopy.points=13"],
    );
    let text = fs::read_to_string(d.path().join("spectrum.csv")).unwrap();
    let mut lines = text.lines();
    let hash = lines.next().unwrap().strip_prefix("# config_hash: ").unwrap().to_string();
    assert_eq!(manifest(d.path())["config_hash"], hash.as_str());
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 13);
    let energies: Vec<usize> = (0..header.len()).filter(|&k| header[k].starts_with('e')).collect();
    for &col in &energies {
        let y: Vec<f64> = rows.iter().map(|r| r[col]).collect();
        let x: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let slope = (y[12] - y[0]) / (x[12] - x[0]);
        for k in 0..13 {
            let line = y[0] + slope * (x[k] - x[0]);
            assert!((y[k] - line).abs() < 1e-9, "{} not straight at row {k}", header[col]);
        }
    }
}

#[test]
fn identical_config_and_seed_give_identical_artifacts() {
    let args = [
        "lz-ramp",
        "--decoherence",
        "--set",
        "lz.ramp.t_ramps=[5.0, 12.5, 20.0]",
        "--set",
        "lz.decoherence.realizations=8",
        "--set",
        "lz.ramp.dt=0.02",
    ];
    let (a, b, c) = (TempDir::new().unwrap(), TempDir::new().unwrap(), TempDir::new().unwrap());
    ok(a.path(), &[&args[..], &["--seed", "3", "--threads", "1"]].concat());
    ok(b.path(), &[&args[..], &["--seed", "3", "--threads", "4"]].concat());
    ok(c.path(), &[&args[..], &["--seed", "4"]].concat());
    for name in ["lz_ramp.csv", "lz_summary.json"] {
        let x = fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name} differs between runs");
    }
    assert_ne!(fs::read(a.path().join("lz_ramp.csv")).unwrap(), fs::read(c.path().join("lz_ramp.csv")).unwrap());
    let m = manifest(a.path());
    assert_eq!(m["seed"], 3);
    assert_eq!(m["command"], "lz-ramp");
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(m["versions"]["mmqed"].is_string());
}

#[test]
fn exchange_scan_writes_table() {
    let d = TempDir::new().unwrap();
    ok(d.path(), &["exchange-scan", "--set", "exchange.centers=[6.2, 6.4]"]);
    let text = fs::read_to_string(d.path().join("exchange.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert_eq!(manifest(d.path())["artifacts"][0], "exchange.csv");
}

#[test]
fn unknown_config_key_is_rejected_with_path() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("run.toml");
    fs::write(&cfg, "[stark.protocol]\nsweep_rte = 0.01\n").unwrap();
    let out = mmqed(d.path(), &["stark-ramsey", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stark.protocol.sweep_rte"), "{err}");
}

#[test]
fn invalid_override_value_is_rejected_with_path() {
    let d = TempDir::new().unwrap();
    let out = mmqed(d.path(), &["spectroscopy", "--set", "spectroscopy.qubit=3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("spectroscopy.qubit"));
}

#[test]
fn config_file_round_trips_through_show_config() {
    let d = TempDir::new().unwrap();
    let out = mmqed(d.path(), &["show-config", "--set", "device.g_f=0.12"]);
    assert!(out.status.success());
    let cfg = d.path().join("resolved.toml");
    fs::write(&cfg, &out.stdout).unwrap();
    let again = mmqed(d.path(), &["show-config", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn numerical_contract_failure_names_the_invariant() {
    let d = TempDir::new().unwrap();
    let out = mmqed(
        d.path(),
        &[
            "cz-calibrate",
            "--set",
            "cz.schedule.load_time=10",
            "--set",
            "cz.calibration.load_time=[10.0, 10.0]",
            "--set",
            "cz.calibration.refine=false",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("leakage"), "{err}");
    assert!(manifest(d.path())["status"].as_str().unwrap().starts_with("error"));
}

#[test]
fn bell_with_decoherence_reports_fidelity() {
    let d = TempDir::new().unwrap();
    ok(
        d.path(),
        &["bell", "--decoherence", "--set", "bell.decoherence.realizations=24", "--set", "bell.bootstrap_resamples=20"],
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("bell.json")).unwrap()).unwrap();
    let f = report["bell"]["fidelity"].as_f64().unwrap();
    assert!((0.9..1.0).contains(&f), "fidelity {f}");
    assert_eq!(report["decoherence"]["enabled"], true);
    assert_eq!(report["config_hash"], manifest(d.path())["config_hash"]);
}
