use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.json"))
}

fn symflag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symflag")).args(args).env_remove("SYMFLAG_REPORT_DIR").output().expect("binary runs")
}

/// Runs with `--out <dir>/<report>` and returns (exit code, stdout, report).
fn run(dir: &TempDir, report: &str, args: &[&str]) -> (i32, String, Value) {
    let out = dir.path().join(report);
    let mut all: Vec<&str> = args.to_vec();
    let out_s = out.to_str().unwrap().to_string();
    all.extend(["--out", &out_s]);
    let o = symflag(&all);
    let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
    let code = o.status.code().unwrap();
    let report = std::fs::read_to_string(&out).map(|s| serde_json::from_str(&s).unwrap()).unwrap_or(Value::Null);
    (code, stdout, report)
}

fn load(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

fn save(dir: &TempDir, name: &str, v: &Value) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn row<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["rows"].as_array().unwrap().iter().find(|r| r["name"] == name).unwrap_or_else(|| panic!("no row {name}"))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let dir = TempDir::new().unwrap();
    let (code, _, rep) = run(&dir, "a.json", &["validate", path(&fixture("canonical-torus"))]);
    assert_eq!(code, 0);
    assert_eq!(rep["all_pass"], true);

    let (code, stdout, rep) = run(&dir, "b.json", &["validate", path(&fixture("collapsed-inclusion"))]);
    assert_eq!(code, 1);
    assert!(stdout.contains("Structural"), "{stdout}");
    assert_eq!(rep["data"]["violations"][0]["kind"], "structural");

    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "").unwrap();
    let o = symflag(&["validate", path(&empty)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema"));

    let o = symflag(&["validate", path(&dir.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_fields_are_input_errors() {
    let dir = TempDir::new().unwrap();
    let mut fx = load("point");
    fx["colour"] = json!("blue");
    let p = save(&dir, "fx.json", &fx);
    assert_eq!(symflag(&["validate", &p]).status.code(), Some(2));
}

#[test]
fn moment_values_on_canonical_flag() {
    let dir = TempDir::new().unwrap();
    let (code, _, rep) = run(&dir, "m.json", &["moment", path(&fixture("canonical-torus"))]);
    assert_eq!(code, 0);
    let labels: Vec<&str> = rep["data"]["labels"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let values: Vec<f64> = rep["data"]["values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(labels, ["1", "cos(x1)", "cos(x2)", "cos(x1+y1)", "sin(y1-x2)"]);
    assert!((values[0] - (2.0 + 4.0 * PI * PI)).abs() <= 1e-8);
    assert!(values[1].abs() <= 1e-10);
    assert!((values[3] - 2.0).abs() <= 1e-10);
}

#[test]
fn moment_probe_sets() {
    let dir = TempDir::new().unwrap();
    let fx = path(&fixture("point")).to_string();

    let none = save(&dir, "none.json", &json!([]));
    let (code, _, rep) = run(&dir, "a.json", &["moment", &fx, "--probes", &none]);
    assert_eq!(code, 0);
    assert_eq!(rep["data"]["values"], json!([]));

    let bad = save(&dir, "bad.json", &json!([{ "terms": [{ "coeff": 1.0, "wave": "cos", "freq": [1, 0, 0] }] }]));
    let (code, _, _) = run(&dir, "b.json", &["moment", &fx, "--probes", &bad]);
    assert_eq!(code, 2);

    let (code, _, rep) = run(&dir, "c.json", &["moment", &fx, "--probes", "dictionary:1"]);
    assert_eq!(code, 0);
    assert_eq!(rep["data"]["values"].as_array().unwrap().len(), rep["data"]["labels"].as_array().unwrap().len());
    assert!(rep["data"]["values"].as_array().unwrap().len() > 1);

    let (code, _, _) = run(&dir, "d.json", &["moment", &fx, "--probes", "dictionary:x"]);
    assert_eq!(code, 2);
}

#[test]
fn check_argument_and_failure_paths() {
    let dir = TempDir::new().unwrap();
    let fx = path(&fixture("canonical-torus")).to_string();
    assert_eq!(symflag(&["check", &fx, "--suite", "bogus"]).status.code(), Some(2));

    let (code, _, rep) = run(&dir, "k.json", &["check", &fx, "--suite", "kks"]);
    assert_eq!(code, 0);
    assert_eq!(rep["suite"], "kks");

    let (code, _, rep) = run(&dir, "neg.json", &["check", &fx, "--suite", "kks", "--debug-negate-omega"]);
    assert_eq!(code, 1);
    assert_eq!(row(&rep, "kks.random_pairs")["pass"], false);
}

#[test]
fn stokes_sweep_converges() {
    let dir = TempDir::new().unwrap();
    let (code, _, rep) = run(&dir, "s.json", &["check", path(&fixture("canonical-torus")), "--suite", "stokes"]);
    assert_eq!(code, 0);
    assert!(row(&rep, "stokes.residual")["value"].as_f64().unwrap() <= 1e-6);
    assert!(row(&rep, "stokes.sweep.slope")["value"].as_f64().unwrap() >= 1.7);
}

#[test]
fn point_fixture_passes_all_suites() {
    let dir = TempDir::new().unwrap();
    let (code, stdout, _) = run(&dir, "p.json", &["check", path(&fixture("point"))]);
    assert_eq!(code, 0, "{stdout}");
}

fn with_hamiltonian(dir: &TempDir, name: &str, terms: Value, t: f64) -> String {
    let mut fx = load("small-torus");
    fx["flow"]["hamiltonian"] = terms;
    fx["flow"]["t"] = json!(t);
    fx["flow"]["dt"] = json!(1e-2);
    save(dir, name, &fx)
}

#[test]
fn zero_hamiltonian_is_a_bitwise_fixed_point() {
    let dir = TempDir::new().unwrap();
    let fx = with_hamiltonian(&dir, "zero.json", json!([]), 0.5);
    let (code, _, _) = run(&dir, "a.json", &["flow", &fx]);
    assert_eq!(code, 0);
    let once = std::fs::read(dir.path().join("a.fixture.json")).unwrap();
    let again = dir.path().join("a.fixture.json");
    let (code, _, _) = run(&dir, "b.json", &["flow", path(&again)]);
    assert_eq!(code, 0);
    let twice = std::fs::read(dir.path().join("b.fixture.json")).unwrap();
    assert_eq!(once, twice);

    let csv = std::fs::read_to_string(dir.path().join("a.trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,probe,value"));
    let mut first = std::collections::HashMap::new();
    for l in lines {
        let parts: Vec<&str> = l.split(',').collect();
        let v: f64 = parts[2].parse().unwrap();
        let v0 = *first.entry(parts[1].to_string()).or_insert(v);
        assert_eq!(v, v0, "{l}");
    }
}

#[test]
fn momentum_flow_translates_x1() {
    let dir = TempDir::new().unwrap();
    let y1 = json!([{ "coeff": 1.0, "wave": "cos", "freq": [0, 0, 0, 0], "powers": [0, 1, 0, 0] }]);
    let zero = with_hamiltonian(&dir, "zero.json", json!([]), 0.0);
    let shift = with_hamiltonian(&dir, "shift.json", y1, 1.0);
    assert_eq!(run(&dir, "a.json", &["flow", &zero]).0, 0);
    let (code, _, rep) = run(&dir, "b.json", &["flow", &shift]);
    assert_eq!(code, 0);
    assert_eq!(row(&rep, "flow.conservation")["pass"], true);

    let positions = |f: &str| -> Vec<Vec<f64>> {
        let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(f)).unwrap()).unwrap();
        serde_json::from_value(v["positions"].clone()).unwrap()
    };
    let (before, after) = (positions("a.fixture.json"), positions("b.fixture.json"));
    assert_eq!(before.len(), after.len());
    let wrap = |d: f64| d - TAU * (d / TAU).round();
    for (p, q) in before.iter().zip(&after) {
        assert!(wrap(q[0] - p[0] - 1.0).abs() <= 1e-9, "{p:?} -> {q:?}");
        for k in 1..4 {
            assert!(wrap(q[k] - p[k]).abs() <= 1e-9);
        }
    }
}

#[test]
fn flow_conserves_the_hamiltonian_pairing() {
    let dir = TempDir::new().unwrap();
    let mut fx = load("deformed-torus");
    fx["flow"]["t"] = json!(0.2);
    let p = save(&dir, "fx.json", &fx);
    let (code, stdout, rep) = run(&dir, "f.json", &["flow", &p]);
    assert_eq!(code, 0, "{stdout}");
    assert!(row(&rep, "flow.conservation")["value"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn lifting_modes() {
    let dir = TempDir::new().unwrap();
    let fx = path(&fixture("small-torus")).to_string();
    for mode in ["direct", "inductive"] {
        let (code, stdout, rep) = run(&dir, &format!("{mode}.json"), &["lift", &fx, "--mode", mode]);
        assert_eq!(code, 0, "{stdout}");
        assert!(row(&rep, &format!("lift.{mode}.residual"))["value"].as_f64().unwrap() <= 1e-3);
    }

    let mut rep_fx = load("small-torus");
    rep_fx["lift"]["tangent"] = json!({ "hamiltonian": [{ "coeff": 1.0, "wave": "sin", "freq": [1, 0, -1, 1] }] });
    let p = save(&dir, "rep.json", &rep_fx);
    let (code, _, rep) = run(&dir, "r.json", &["lift", &p, "--mode", "direct"]);
    assert_eq!(code, 0);
    assert!(row(&rep, "lift.direct.residual")["value"].as_f64().unwrap() <= 1e-10);

    assert_eq!(symflag(&["lift", path(&fixture("incompatible-tangent"))]).status.code(), Some(2));
}

#[test]
fn report_directory_from_environment() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_symflag"))
        .args(["validate", path(&fixture("point"))])
        .env("SYMFLAG_REPORT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("validate-point.json").exists());
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn reports_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let fx = path(&fixture("small-torus")).to_string();
    let (_, _, a) = run(&dir, "a.json", &["check", &fx, "--suite", "equivariance"]);
    let (_, _, b) = run(&dir, "b.json", &["check", &fx, "--suite", "equivariance"]);
    let (_, _, c) = run(&dir, "c.json", &["check", &fx, "--suite", "equivariance", "--seed", "7"]);
    assert_eq!(without_timing(a.clone()), without_timing(b));
    assert_ne!(without_timing(a)["rows"], without_timing(c)["rows"]);
}
