use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_twistspec"));
    c.env_remove("TWISTSPEC_SEED");
    c
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn results(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("results.json")).unwrap()).unwrap()
}

const SQUARE: &str = r#"{
  "cross_section": {"kind": "rectangle", "params": [1, 1], "h": 0.015625},
  "beta0": 0,
  "pipeline": ["threshold"],
  "output_dir": "out"
}"#;

#[test]
fn square_threshold_matches_separable_eigenvalue() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sq.json", SQUARE);
    let out = run(&["run", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out");
    let r = results(&dir);
    let e = r["threshold"]["E"].as_f64().unwrap();
    let exact = 2.0 * std::f64::consts::PI.powi(2);
    assert!((e / exact - 1.0).abs() < 0.01, "{e}");
    assert_eq!(r["config"]["solver"]["tol"], 1e-8);
    assert_eq!(r["config"]["potential"], "none");
    let csv = std::fs::read_to_string(dir.join("threshold.csv")).unwrap();
    assert!(csv.starts_with("beta0,E,gap_vs_beta0_zero"));
    for f in ["f_profile_t2.dat", "f_profile_t3.dat"] {
        let text = std::fs::read_to_string(dir.join(f)).unwrap();
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 63);
        assert!(rows.iter().all(|r| r.len() == 2 && r[1] > 0.0));
    }
    let leftovers: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn empty_pipeline_echoes_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "e.json", &SQUARE.replace("[\"threshold\"]", "[]"));
    let out = run(&["run", cfg.to_str().unwrap(), "--out", "echo"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let r = results(&tmp.path().join("echo"));
    assert!(r.get("threshold").is_none());
    assert_eq!(r["config"]["output_dir"], "echo");
    assert_eq!(r["config"]["ds"], 0.125);
    assert_eq!(r["status"], "ok");
}

#[test]
fn schema_errors_exit_with_one_and_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = SQUARE.replace("\"beta0\": 0", "\"beta0\": \"zero\"");
    let cfg = write_config(tmp.path(), "bad.json", &bad);
    for cmd in ["validate", "run"] {
        let out = run(&[cmd, cfg.to_str().unwrap()], tmp.path());
        assert_eq!(out.status.code(), Some(1));
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("line 3") && err.contains("beta0"), "{err}");
    }
    let cfg = write_config(tmp.path(), "probe.json", &SQUARE.replace("[\"threshold\"]", "[\"probe\"]").replace("\"beta0\": 0", "\"beta0\": 1"));
    let out = run(&["validate", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("L_list"));
    let good = write_config(tmp.path(), "good.json", SQUARE);
    assert_eq!(run(&["validate", good.to_str().unwrap()], tmp.path()).status.code(), Some(0));
}

#[test]
fn pipeline_failure_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    // The annulus reaches the boundary of this thin ellipse, so the identity check rejects it.
    let cfg = r#"{
  "cross_section": {"kind": "ellipse", "params": [1, 0.6], "h": 0.0625},
  "beta0": 1,
  "pipeline": ["threshold", "identity_check"],
  "identity_check": {"test_functions": [{"kind": "annulus", "s_width": 1, "inner": 0.5, "outer": 0.99, "phase": 0}]},
  "output_dir": "out"
}"#;
    let p = write_config(tmp.path(), "c.json", cfg);
    let out = run(&["run", p.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let r = results(&tmp.path().join("out"));
    assert_eq!(r["status"], "pipeline_error");
    assert!(r["errors"][0].as_str().unwrap().contains("identity_check"));
    assert!(r["threshold"]["E"].as_f64().unwrap() > 0.0);
}

#[test]
fn bound_state_scenario_reports_sub_threshold_eigenvalue() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{
  "cross_section": {"kind": "ellipse", "params": [1, 0.6], "h": 0.0625},
  "beta0": 1,
  "mu": {"kind": "gaussian_bump", "amplitude": 0.5, "width": 1.5},
  "potential": "none",
  "L_list": [8, 12, 16],
  "pipeline": ["probe"],
  "output_dir": "out"
}"#;
    let p = write_config(tmp.path(), "bs.json", cfg);
    let out = bin().args(["run", p.to_str().unwrap()]).env("TWISTSPEC_SEED", "11").current_dir(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out");
    let r = results(&dir);
    assert_eq!(r["probe"]["verdict"], "bound_state");
    assert_eq!(r["config"]["solver"]["seed"], 11);
    assert_eq!(r["probe"]["seed"], 11);
    let e = r["probe"]["E"].as_f64().unwrap();
    for row in r["probe"]["below_E"].as_array().unwrap() {
        let row = row.as_array().unwrap();
        assert!(!row.is_empty());
        assert!(row.iter().all(|v| v.as_f64().unwrap() < e));
    }
    let mut rdr = csv::Reader::from_path(dir.join("probe.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["L", "index", "lambda", "below_E"]);
    assert_eq!(rdr.records().count(), 18);
    let curve = std::fs::read_to_string(dir.join("lambda1_vs_L.dat")).unwrap();
    assert_eq!(curve.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

const DISK: &str = r#"{
  "cross_section": {"kind": "ellipse", "params": [1, 1], "h": 0.0625},
  "beta0": 0,
  "pipeline": ["threshold"],
  "output_dir": "sweep"
}"#;

fn sweep_rows(dir: &Path) -> Vec<csv::StringRecord> {
    let mut rdr = csv::Reader::from_path(dir.join("sweep.csv")).unwrap();
    rdr.records().map(|r| r.unwrap()).collect()
}

#[test]
fn h_sweep_converges_monotonically() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), "d.json", DISK);
    let out = run(&["sweep", p.to_str().unwrap(), "--param", "h", "--values", "1/16,1/32,1/64", "--jobs", "2"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = sweep_rows(&tmp.path().join("sweep"));
    assert_eq!(rows.len(), 3);
    let e: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    let hs: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(hs, vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]);
    // Exterior-node Dirichlet data: approach from below, first order.
    let j01sq = 2.404825557695773f64.powi(2);
    assert!(e[0] < e[1] && e[1] < e[2] && e[2] < j01sq, "{e:?}");
    assert!((j01sq - e[2]) < (j01sq - e[1]) && (j01sq - e[1]) < (j01sq - e[0]));
}

#[test]
fn single_value_sweep_matches_run() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), "d.json", DISK);
    let out = run(&["sweep", p.to_str().unwrap(), "--param", "beta0", "--values", "0"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["run", p.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let a = std::fs::read(tmp.path().join("sweep/runs/000/results.json")).unwrap();
    let b = std::fs::read(tmp.path().join("sweep/results.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn failed_sweep_rows_do_not_abort() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{
  "cross_section": {"kind": "ellipse", "params": [1, 0.6], "h": 0.0625},
  "beta0": 0.2,
  "mu": {"kind": "gaussian_bump", "amplitude": 0.1, "width": 1.5},
  "L_list": [8, 12, 16],
  "pipeline": ["threshold"],
  "output_dir": "out"
}"#;
    let p = write_config(tmp.path(), "m.json", cfg);
    let out = run(&["sweep", p.to_str().unwrap(), "--param", "mu.amplitude", "--values", "0.05,0.5,0.1"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let rows = sweep_rows(&tmp.path().join("out"));
    let status: Vec<&str> = rows.iter().map(|r| &r[2]).collect();
    assert_eq!(status, vec!["ok", "failed", "ok"]);
    assert!(rows[1][14].contains("invalid"), "{:?}", &rows[1]);
    let out = run(&["sweep", p.to_str().unwrap(), "--param", "potential.amplitude", "--values", "1"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["sweep", p.to_str().unwrap(), "--param", "width", "--values", "1"], tmp.path());
    assert_ne!(out.status.code(), Some(0));
}

/// Every JSON block in the schema document is a valid config.
#[test]
fn schema_examples_validate() {
    let doc = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/SCHEMA.md")).unwrap();
    let mut blocks = Vec::new();
    let mut cur: Option<String> = None;
    for line in doc.lines() {
        match (&mut cur, line.trim_start()) {
            (None, l) if l.starts_with("```json") => cur = Some(String::new()),
            (Some(_), l) if l.starts_with("```") => blocks.push(cur.take().unwrap()),
            (Some(b), _) => {
                b.push_str(line);
                b.push('\n');
            }
            _ => {}
        }
    }
    let configs: Vec<&String> = blocks.iter().filter(|b| b.contains("\"pipeline\"")).collect();
    assert!(configs.len() >= 5);
    let mut covered = std::collections::BTreeSet::new();
    for b in configs {
        let c = twistspec_cli::config::RunConfig::from_json(b).unwrap_or_else(|e| panic!("{e}\n{b}"));
        covered.extend(c.pipeline.iter().map(|p| p.name()));
    }
    assert_eq!(covered.len(), 5, "{covered:?}");
}
