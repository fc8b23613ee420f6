mod common;

use std::path::Path;
use std::process::Command;

use common::{run_cli, scenario};
use gsmrac::fixtures::FIXTURE_DIR;
use serde_json::Value;

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|e| panic!("not json ({e}): {s}"))
}

fn write_json(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p.display().to_string()
}

fn fixture_json(rel: &str) -> Value {
    json(&std::fs::read_to_string(Path::new(FIXTURE_DIR).join(rel)).unwrap())
}

/// A scenario file in `dir` with family and `P` rewritten to absolute paths.
fn relocated(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> String {
    let mut v = fixture_json(&format!("scenarios/{name}.json"));
    v["family"] = Value::from(format!("{FIXTURE_DIR}/engine_family.json"));
    v["controller"]["P"] = Value::from(format!("{FIXTURE_DIR}/published_p.json"));
    edit(&mut v);
    write_json(dir, &format!("{name}.json"), &v)
}

#[test]
fn verify_published_p() {
    let (code, out, err) = run_cli(&["lyapunov", "verify"]);
    assert_eq!(code, 1, "{err}");
    let c = json(&out);
    assert_eq!(c["valid"], Value::Bool(false));
    assert_eq!(c["margins"].as_array().unwrap().len(), 3);
    let (code, out, _) = run_cli(&["lyapunov", "verify", "--q", "0.08"]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["valid"], Value::Bool(true));
    let (code, _, _) = run_cli(&["lyapunov", "verify", "--q", "0.08", "--grid", "30", "--perturb", "5", "--perturb-delta", "0.01", "--seed", "7"]);
    assert_eq!(code, 0);
}

#[test]
fn verify_rejects_indefinite_p_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let neg: Vec<Vec<f64>> = (0..6).map(|i| (0..6).map(|j| if i == j { -1.0 } else { 0.0 }).collect()).collect();
    let p = write_json(dir.path(), "neg.json", &serde_json::json!(neg));
    let (code, out, err) = run_cli(&["lyapunov", "verify", "--p", &p]);
    assert_eq!(code, 1);
    assert_eq!(json(&out)["valid"], Value::Bool(false));
    assert!(err.contains("positive definite"), "{err}");
    let (code, _, err) = run_cli(&["lyapunov", "verify", "--p", "/no/such/p.json"]);
    assert_eq!(code, 2, "{err}");
    let (code, _, _) = run_cli(&["lyapunov", "verify", "--family", "/no/such/family.json"]);
    assert_eq!(code, 2);
}

#[test]
fn solve_produces_a_certificate_that_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.json");
    let (code, out, err) = run_cli(&["lyapunov", "solve", "--out", cert.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let c = json(&out);
    assert_eq!(c["valid"], Value::Bool(true));
    assert!(c["margins"].as_array().unwrap().iter().all(|m| m.as_f64().unwrap() <= -1e-8));
    let p = write_json(dir.path(), "p.json", &json(&std::fs::read_to_string(&cert).unwrap())["P"]);
    let (code, _, err) = run_cli(&["lyapunov", "verify", "--p", &p, "--grid", "30"]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn solve_reports_failures() {
    let (code, out, _) = run_cli(&["lyapunov", "solve", "--max-iter", "1"]);
    assert_eq!(code, 1);
    assert_eq!(json(&out)["valid"], Value::Bool(false));
    let dir = tempfile::tempdir().unwrap();
    let mut fam = fixture_json("engine_family.json");
    for p in fam["points"].as_array_mut().unwrap() {
        p["K_i"] = serde_json::json!([[3.0, 3.0], [3.0, 3.0]]);
    }
    let f = write_json(dir.path(), "unstable.json", &fam);
    let (code, out, _) = run_cli(&["lyapunov", "solve", "--family", &f]);
    assert_eq!(code, 1);
    let v = json(&out);
    assert_eq!(v["valid"], Value::Bool(false));
    assert!(v["reason"].as_str().unwrap().contains("Hurwitz"));
    let (code, _, _) = run_cli(&["lyapunov", "solve", "--q", "-1"]);
    assert_eq!(code, 2);
}

#[test]
fn simulate_basic_writes_trace_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, out, err) = run_cli(&["simulate", &scenario("basic"), "--out-dir", d]);
    assert_eq!(code, 0, "{err}");
    let s = json(out.trim());
    assert_eq!(s["rows"], Value::from(60001));
    let rep = json(&std::fs::read_to_string(dir.path().join("basic.bounds.json")).unwrap());
    assert_eq!(rep["passed"], Value::Bool(true));
    let csv = std::fs::read_to_string(dir.path().join("basic.csv")).unwrap();
    assert_eq!(csv.lines().count(), 60002);
    assert!(csv.starts_with("t,x1,x2,x3,x4,x5,x6,xm1,"));
}

#[test]
fn simulate_flags_a_violated_bound() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, out, err) = run_cli(&["simulate", &scenario("adversarial"), "--out-dir", d]);
    assert_eq!(code, 1, "{err}");
    let s = json(out.trim());
    assert_eq!(s["failed_checks"], serde_json::json!(["theorem2_e_norm"]));
    assert!(s["first_violation_t"].as_f64().unwrap() > 15.0);
    assert!(err.contains("theorem2_e_norm"));
}

#[test]
fn simulate_reports_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let p = relocated(dir.path(), "adversarial", |v| v["duration"] = Value::from(30.0));
    let (code, out, err) = run_cli(&["simulate", &p, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
    assert!(json(out.trim())["error"].as_str().unwrap().contains("diverged"));
}

#[test]
fn simulate_rejects_bad_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let bad_dt = relocated(dir.path(), "basic", |v| v["dt"] = Value::from(0.014));
    assert_eq!(run_cli(&["simulate", &bad_dt, "--out-dir", d]).0, 2);
    let unknown = relocated(dir.path(), "aged", |v| v["gain"] = Value::from(1));
    assert_eq!(run_cli(&["simulate", &unknown, "--out-dir", d]).0, 2);
    assert_eq!(run_cli(&["simulate", "/no/such.json", "--out-dir", d]).0, 2);
    assert_eq!(run_cli(&["simulate"]).0, 2);
}

#[test]
fn simulate_many_in_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let short = |name: &str| relocated(dir.path(), name, |v| v["duration"] = Value::from(3.0));
    let (a, b) = (short("basic"), short("constrained"));
    let (code, out, err) = run_cli(&["simulate", &a, &b, "--jobs", "2", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let lines: Vec<Value> = out.lines().map(json).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0]["scenario"].as_str().unwrap().ends_with("basic.json"));
    assert!(dir.path().join("constrained.csv").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let p = relocated(dir.path(), "constrained", |v| v["duration"] = Value::from(10.0));
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let (code, _, err) = run_cli(&["simulate", &p, "--out", out.to_str().unwrap(), "--bounds", dir.path().join("r.json").to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn plotdata_splits_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = relocated(dir.path(), "basic", |v| v["duration"] = Value::from(1.0));
    let csv = dir.path().join("tr.csv");
    let rep = dir.path().join("tr.json");
    let (code, _, _) = run_cli(&["simulate", &p, "--out", csv.to_str().unwrap(), "--bounds", rep.to_str().unwrap()]);
    assert_eq!(code, 0);
    let series = dir.path().join("series");
    let (code, out, err) = run_cli(&["plotdata", csv.to_str().unwrap(), "--columns", "e_norm,Khat*", "--out", series.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let files: Vec<String> = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(files.len(), 13);
    let e = std::fs::read_to_string(series.join("e_norm.csv")).unwrap();
    assert!(e.starts_with("t,e_norm\n"));
    assert_eq!(e.lines().count(), 1002);

    let (code, _, err) = run_cli(&["plotdata", csv.to_str().unwrap(), "--columns", "nope", "--out", series.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("available") && err.contains("Khat_0_0"), "{err}");

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "t,e_norm\n").unwrap();
    let (code, _, _) = run_cli(&["plotdata", empty.to_str().unwrap(), "--columns", "e_norm"]);
    assert_eq!(code, 2);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_gsmrac");
    assert_eq!(Command::new(bin).arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(Command::new(bin).output().unwrap().status.code(), Some(2));
    let o = Command::new(bin).args(["lyapunov", "verify", "--q", "0.08"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("\"valid\": true"));
    assert_eq!(Command::new(bin).args(["lyapunov", "verify"]).output().unwrap().status.code(), Some(1));
}
