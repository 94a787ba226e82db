//! Runs the `sgin` binary end to end on a down-sized reference scenario.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"{
  "name": "small",
  "epoch_s": 80.0,
  "ngso1": {},
  "ngso2": {},
  "users": {
    "ngso1": [{ "lat": 52.6283, "lon": -80.9501 }],
    "ngso2": [{ "lat": 51.6903, "lon": -80.0795 }],
    "bs": [{ "lat": 53.1494, "lon": -80.7172 }]
  },
  "base_stations": [{ "lat": 53.1494, "lon": -80.7150 }],
  "predictor": {
    "lstm_widths": [4, 4], "epochs": 1, "folds": 2, "learning_rates": [0.01],
    "arma_orders": [[1, 1]], "max_windows": 64
  },
  "allocator": { "iterations": 20, "dqn": { "fc_widths": [8, 8], "batch_size": 8 } },
  "simulation": {
    "eval_slots": 2, "history_slots": 96, "train_slots": 4,
    "pmax_grid_w": [1.0, 5.0], "phi_grid_db": [0.0, 10.0],
    "monte_carlo_replicas": 2000, "timeseries_epochs": 3
  }
}"#;

struct Fixture {
    dir: TempDir,
    scenario: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let scenario = dir.path().join("small.json");
        std::fs::write(&scenario, SMALL).unwrap();
        Fixture { dir, scenario }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_sgin"))
            .args(args)
            .env("SGIN_THREADS", "1")
            .env("RUST_LOG", "error")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    }

    fn trained(&self) -> PathBuf {
        let ck = self.path("ck");
        if !ck.join("qnetwork.ckpt").exists() {
            self.ok(&["train", "--scenario", s(&self.scenario), "--out", s(&ck)]);
        }
        ck
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

/// Data rows of a CSV file: the version comment and header are skipped.
fn rows(p: &Path) -> Vec<Vec<String>> {
    let text = read(p);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# sgin "));
    lines.skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn validate_prints_normalised_scenario() {
    let f = Fixture::new();
    let out = f.ok(&["validate", "--scenario", s(&f.scenario)]);
    let text = String::from_utf8(out.stdout).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["radio"]["frequency_hz"], 17.9e9);
    assert_eq!(v["phi_th_db"], 10.0);
}

#[test]
fn invalid_scenario_fails_with_field_path() {
    let f = Fixture::new();
    let bad = f.path("bad.json");
    std::fs::write(&bad, r#"{"ngso1": {"beam_half_angle_deg": 0}, "users": {"ngso1": [{"lat": 0, "lon": 0}]}}"#).unwrap();
    let out = f.run(&["validate", "--scenario", s(&bad)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ngso1.beam_half_angle_deg"));
}

#[test]
fn empty_seed_list_is_an_error() {
    let f = Fixture::new();
    let out = f.run(&["sweep", "--scenario", s(&f.scenario), "--out", s(&f.path("o")), "--seeds", ""]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seeds"));
}

#[test]
fn train_then_run_every_experiment() {
    let f = Fixture::new();
    let ck = f.trained();
    for name in ["qnetwork.ckpt", "predictor.ckpt", "training-curve.csv"] {
        assert!(ck.join(name).exists(), "{name}");
    }
    assert_eq!(rows(&ck.join("training-curve.csv")).len(), 4);

    // Sweeps are byte-identical across runs.
    let sweep = |out: &str| {
        f.ok(&[
            "sweep", "--scenario", s(&f.scenario), "--out", s(&f.path(out)), "--seeds", "0..2",
            "--checkpoints", s(&ck),
        ]);
    };
    sweep("a");
    sweep("b");
    for name in ["sinr-vs-pmax.csv", "sinr-vs-pmax-slots.csv", "decisions.csv"] {
        assert_eq!(read(&f.path("a").join(name)), read(&f.path("b").join(name)), "{name}");
    }
    let summary = rows(&f.path("a").join("sinr-vs-pmax.csv"));
    assert_eq!(summary.len(), 3 * 2);

    // Outage: one row per threshold and method for every link.
    let op = f.path("op");
    f.ok(&[
        "op", "--scenario", s(&f.scenario), "--out", s(&op), "--seeds", "0", "--scheme", "jmdr-im",
        "--method", "analytic,monte-carlo", "--checkpoints", s(&ck),
    ]);
    let op_rows = rows(&op.join("op.csv"));
    for class in ["ngso1", "ngso2", "bs"] {
        let link: Vec<_> = op_rows.iter().filter(|r| r[2] == class).collect();
        assert_eq!(link.len(), 2 * 2, "{class}");
        for method in ["analytic", "monte-carlo"] {
            assert!(link.iter().any(|r| r[5] == method), "{class} {method}");
        }
    }

    let ts = f.path("ts");
    f.ok(&["timeseries", "--scenario", s(&f.scenario), "--out", s(&ts), "--seeds", "0", "--checkpoints", s(&ck)]);
    assert!(!rows(&ts.join("timeseries.csv")).is_empty());
}

#[test]
fn coverage_report_is_reproducible() {
    let f = Fixture::new();
    for out in ["c1", "c2"] {
        f.ok(&["coverage", "--scenario", s(&f.scenario), "--out", s(&f.path(out)), "--epochs", "5"]);
    }
    let a = read(&f.path("c1").join("coverage.csv"));
    assert_eq!(a, read(&f.path("c2").join("coverage.csv")));
    assert_eq!(rows(&f.path("c1").join("coverage.csv")).len(), 5 * 3);
}
