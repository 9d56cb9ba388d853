use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SPHERE: &str = r#"{
  "geometry": "sphere",
  "n": 2,
  "field": {"gamma": [0, 0, 1]},
  "samples": 20,
  "seed": 42,
  "suites": ["conformality", "lemmas", "soliton", "concircular", "classify", "codazzi", "gauss"]
}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soliton-lab")).args(args).output().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn catalog_lists_seven_entries() {
    let out = run(&["catalog"]);
    assert_eq!(out.status.code(), Some(0));
    let list: Value = serde_json::from_slice(&out.stdout).unwrap();
    let list = list.as_array().unwrap();
    assert_eq!(list.len(), 7);
    let find = |name: &str| list.iter().find(|e| e["name"] == name).unwrap().clone();
    assert_eq!(find("sphere")["k_expected"], 1.0);
    assert_eq!(find("flat_plane")["mean_curvature"], 0.0);
    assert_eq!(run(&["catalog"]).stdout, out.stdout);
}

#[test]
fn verify_passes_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "sphere.json", SPHERE);
    let first = run(&["verify", &cfg]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let second = run(&["verify", &cfg]);
    assert_eq!(first.stdout, second.stdout);
    let report: Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["run"]["seed"], 42);
    assert_eq!(report["classification"]["verdict"]["case"], "spherical");
    assert!(stderr(&first).contains("sphere n=2 seed=42 samples=20: pass"));
}

#[test]
fn out_and_csv_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "sphere.json", SPHERE);
    let out_path = dir.path().join("summary.csv");
    let out = run(&["verify", &cfg, "--format", "csv-summary", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("suite,max_residual,tolerance,pass"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 18);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
}

#[test]
fn flags_override_the_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "sphere.json", SPHERE);
    let out = run(&["verify", &cfg, "--seed", "7", "--samples", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["run"]["seed"], 7);
    assert_eq!(report["run"]["samples"], 5);

    let out = run(&["verify", &cfg, "--tol", "lemmas=0"]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], false);
    assert_eq!(report["run"]["tolerance_overrides"]["lemmas"], 0.0);
}

#[test]
fn validation_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let bad_b = SPHERE.replace(r#""field": {"gamma": [0, 0, 1]}"#, r#""field": {"B": [[1, 0, 0], [0, 0, 0], [0, 0, 0]]}"#);
    let out = run(&["verify", &write(&dir, "b.json", &bad_b)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(stderr(&out).contains("field.B[0][0]"), "{}", stderr(&out));

    let unknown = SPHERE.replace(r#""seed": 42"#, r#""seed": 42, "colour": "red""#);
    let out = run(&["verify", &write(&dir, "u.json", &unknown)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("colour"));

    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["verify", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["verify", &write(&dir, "t.json", "not json")]).status.code(), Some(2));
    assert_eq!(run(&["demo", "torus"]).status.code(), Some(2));
    assert_eq!(run(&["verify", &write(&dir, "s.json", SPHERE), "--tol", "lemmas"]).status.code(), Some(2));
}

#[test]
fn demo_exit_codes() {
    let ok = run(&["demo", "pseudo_hyperbolic_negative", "--dim", "3", "--samples", "20"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    let saddle = run(&["demo", "saddle_graph", "--samples", "20"]);
    assert_eq!(saddle.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&saddle.stdout).unwrap();
    assert_eq!(report["classification"]["verdict"]["verdict"], "not_applicable");
}

#[test]
fn unwritable_output_exits_two() {
    let dir = TempDir::new().unwrap();
    let target = Path::new(dir.path()).join("missing").join("report.json");
    let out = run(&["catalog", "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
