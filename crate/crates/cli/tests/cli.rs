use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use reslab::export::{read_json, Provenance, Table};
use serde_json::Value;

fn map(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../maps").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reslab")).args(args).output().expect("binary runs")
}

fn ok_stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn eigenvalues(json: &str) -> Vec<Value> {
    let (_, data): (Provenance, Value) = read_json(json).unwrap();
    data["eigenvalues"].as_array().unwrap().clone()
}

#[test]
fn jordan_resonances() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spec.json");
    let m = map("jordan.json");
    ok_stdout(&["resonances", "--map", m.to_str().unwrap(), "--mode", "srb", "--r", "3", "--out", out.to_str().unwrap()]);
    let text = std::fs::read_to_string(out).unwrap();
    let ev = eigenvalues(&text);
    let third = ev
        .iter()
        .find(|e| (e["re"].as_f64().unwrap() + 1.0 / 3.0).abs() < 1e-10 && e["im"].as_f64().unwrap().abs() < 1e-10)
        .expect("-1/3 present");
    assert_eq!(third["jordan"], serde_json::json!([2]));
}

#[test]
fn doubling_mme_resonances() {
    let m = map("doubling.json");
    let ev = eigenvalues(&ok_stdout(&["resonances", "--map", m.to_str().unwrap(), "--mode", "mme", "--r", "2"]));
    let lead: Vec<f64> = ev.iter().take(3).map(|e| e["re"].as_f64().unwrap()).collect();
    for (a, b) in lead.iter().zip([2.0, 1.0, 0.5]) {
        assert!((a - b).abs() < 1e-12, "{lead:?}");
    }
}

#[test]
fn missing_map_is_an_input_error() {
    let out = run(&["resonances", "--map", "/nonexistent/map.json", "--mode", "srb", "--r", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("map spec not found"));
}

#[test]
fn invalid_map_fails_validation() {
    let out = run(&["validate", "--map", map("bad_slope.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let (_, data): (Provenance, Value) = read_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(data["passed"], Value::Bool(false));
    ok_stdout(&["validate", "--map", map("quad.json").to_str().unwrap()]);
}

#[test]
fn regions_csv_is_reproducible() {
    let m = map("quad.json");
    let args = ["regions", "--map", m.to_str().unwrap(), "--grid", "50"];
    let a = ok_stdout(&args);
    assert_eq!(a, ok_stdout(&args));
    let t = Table::read(&a).unwrap();
    assert_eq!(t.columns, ["region", "a", "b"]);
    assert_eq!(t.meta.params[0], ("grid".to_string(), "50".to_string()));
    for name in ["A0", "A1", "A2", "A3", "A4", "essential", "tau", "mu_star", "unit"] {
        assert!(t.rows.iter().any(|r| r[0] == name), "{name}");
    }
    let (_, data): (Provenance, Value) =
        read_json(&ok_stdout(&["regions", "--map", m.to_str().unwrap(), "--grid", "10", "--format", "json"])).unwrap();
    assert!((data["a3_intercept"].as_f64().unwrap() - 0.5659).abs() < 1e-3);
    assert!((data["a4_intercept"].as_f64().unwrap() - 0.6124).abs() < 1e-3);
}

#[test]
fn xi_scan_exceeds_one_on_the_real_axis() {
    let m = map("quad.json");
    let t = Table::read(&ok_stdout(&[
        "xi-scan", "--map", m.to_str().unwrap(), "--re", "0.55:2.0:100", "--im", "0", "--tol", "1e-8",
    ]))
    .unwrap();
    let xi = t.column("xi_re").unwrap();
    assert_eq!(xi.len(), 100);
    assert!(xi.iter().all(|v| *v > 1.0));
    let out = run(&["xi-scan", "--map", m.to_str().unwrap(), "--re", "0.2", "--im", "0", "--tol", "1e-8"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn doubling_correlation_rate() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("fit.json");
    let m = map("doubling.json");
    let csv = ok_stdout(&[
        "correlate", "--map", m.to_str().unwrap(), "--phi", "x-0.5", "--psi", "x-0.5", "--measure", "srb", "--n", "30",
        "--summary", summary.to_str().unwrap(),
    ]);
    let t = Table::read(&csv).unwrap();
    assert_eq!(t.columns[..5], ["n", "C_re", "C_im", "abs", "predicted_bound"]);
    let (_, data): (Provenance, Value) = read_json(&std::fs::read_to_string(summary).unwrap()).unwrap();
    assert!((data["fit"]["rho"].as_f64().unwrap() - 0.5).abs() < 1e-6);
}

#[test]
fn mme_and_entropy() {
    let m = map("doubling.json");
    let t = Table::read(&ok_stdout(&["mme", "--map", m.to_str().unwrap(), "--phi", "1", "--phi", "x^2", "--n-max", "40"])).unwrap();
    assert_eq!(t.columns, ["n", "1", "x^2"]);
    let last = t.column("x^2").unwrap();
    assert!((last.last().unwrap() - 1.0 / 3.0).abs() < 1e-9);
    let (_, e): (Provenance, Value) = read_json(&ok_stdout(&["entropy", "--map", m.to_str().unwrap()])).unwrap();
    assert!((e["h_top"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-12);
    let out = run(&["mme", "--map", map("scan_map.json").to_str().unwrap(), "--phi", "x", "--n-max", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn discretize_ulam() {
    let m = map("doubling.json");
    let (meta, data): (Provenance, Value) = read_json(&ok_stdout(&[
        "discretize", "--map", m.to_str().unwrap(), "--op", "l1", "--basis", "ulam", "--size", "100",
    ]))
    .unwrap();
    assert_eq!(meta.params[0], ("op".to_string(), "L1".to_string()));
    let ev = data["report"]["eigenvalues"].as_array().unwrap();
    assert!((ev[0]["re"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(data["dim"], 100);
}
