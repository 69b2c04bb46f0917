//! One line per acceptance criterion on the canonical 64x64 torus flag.
//! Run with `--nocapture` to see the lines.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use serde_json::Value;
use symflag_core::ambient::{trig_dictionary, Translation, VectorField};
use symflag_core::currents::{separation_test, MixedForm, Verdict, DEFAULT_SEPARATION_TOL};
use symflag_core::flagmesh::builders::{bumped_torus_flag, canonical_torus_flag, deformed_torus_flag, surface_flag_with_points};
use symflag_core::flagmesh::{act_map, infinitesimal_action};
use symflag_core::symflag::flag_omega;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/canonical-torus.json")
}

fn run(args: &[&str], out: &Path) -> (i32, Value) {
    let o = Command::new(env!("CARGO_BIN_EXE_symflag"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SYMFLAG_REPORT_DIR")
        .output()
        .expect("binary runs");
    let report = serde_json::from_str(&std::fs::read_to_string(out).expect("report written")).unwrap();
    (o.status.code().unwrap(), report)
}

fn value(report: &Value, name: &str) -> f64 {
    report["rows"].as_array().unwrap().iter().find(|r| r["name"] == name).and_then(|r| r["value"].as_f64()).unwrap_or(f64::NAN)
}

fn passed(report: &Value, prefix: &str) -> bool {
    let rows: Vec<&Value> = report["rows"].as_array().unwrap().iter().filter(|r| r["name"].as_str().unwrap().starts_with(prefix)).collect();
    !rows.is_empty() && rows.iter().all(|r| r["pass"] == true)
}

struct Ledger(Vec<(usize, bool)>);

impl Ledger {
    fn record(&mut self, n: usize, ok: bool, what: &str) {
        println!("criterion {n}: {} {what}", if ok { "PASS" } else { "FAIL" });
        self.0.push((n, ok));
    }
}

#[test]
fn acceptance() {
    let dir = tempfile::TempDir::new().unwrap();
    let fx = fixture();
    let fx = fx.to_str().unwrap();
    let mut ledger = Ledger(Vec::new());

    let (code, m) = run(&["moment", fx], &dir.path().join("moment.json"));
    let values: Vec<f64> = m["data"]["values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let ms = m["timing"]["elapsed_ms"].as_f64().unwrap();
    let area = 2.0 + 4.0 * PI * PI;
    // <J, cos x2> equals <J, 1> here: the surface lies in {x2 = 0} and both marked points have x2 = 0
    let ok = code == 0
        && (values[0] - area).abs() <= 1e-8
        && values[1].abs() <= 1e-10
        && (values[2] - area).abs() <= 1e-10
        && (values[3] - 2.0).abs() <= 1e-10
        && ms < 1000.0;
    ledger.record(
        1,
        ok,
        &format!("moments <J,1> = {}, <J,cos x1> = {:e}, <J,cos x2> = {}, <J,cos(x1+y1)> = {}, {ms:.0} ms", values[0], values[1], values[2], values[3]),
    );

    let start = Instant::now();
    let (code, all) = run(&["check", fx], &dir.path().join("check-a.json"));
    let secs = start.elapsed().as_secs_f64();
    assert!(code == 0 || code == 1, "check exited with {code}");

    ledger.record(
        2,
        value(&all, "stokes.residual") <= 1e-6 && value(&all, "stokes.sweep.slope") >= 1.7 && passed(&all, "stokes"),
        &format!("stokes residual {:e}, sweep slope {:.3}", value(&all, "stokes.residual"), value(&all, "stokes.sweep.slope")),
    );
    ledger.record(
        3,
        value(&all, "calc.contraction.omega") <= 1e-10 && passed(&all, "calc"),
        &format!(
            "contraction {:e}, d-identity {:e}/{:e}, Lie identity {:e}/{:e}",
            value(&all, "calc.contraction.omega"),
            value(&all, "calc.d_identity.l0"),
            value(&all, "calc.d_identity.l1"),
            value(&all, "calc.lie_identity.l0"),
            value(&all, "calc.lie_identity.l1")
        ),
    );
    ledger.record(
        4,
        value(&all, "equivariance.random_pairs") <= 1e-4 && value(&all, "equivariance.point") <= 1e-6 && passed(&all, "equivariance"),
        &format!("equivariance pairs {:e}, point {:e}", value(&all, "equivariance.random_pairs"), value(&all, "equivariance.point")),
    );
    ledger.record(5, value(&all, "kks.random_pairs") <= 1e-6 && passed(&all, "kks"), &format!("KKS {:e}", value(&all, "kks.random_pairs")));

    let flag = canonical_torus_flag(64).unwrap();
    let (a, b) = (1.5, -0.7);
    let zu = infinitesimal_action(&flag, &VectorField::constant(vec![0.0, 0.0, a, 0.0]));
    let zv = infinitesimal_action(&flag, &VectorField::constant(vec![0.0, 0.0, 0.0, b]));
    let omega = flag_omega(&flag, &zu, &zv).unwrap();
    let hand = a * b * (4.0 * PI * PI + 2.0);
    ledger.record(
        6,
        value(&all, "nondegeneracy.rank") >= 20.0 && value(&all, "nondegeneracy.min_singular_value") > 1e-8 && (omega - hand).abs() <= 1e-8 && passed(&all, "nondegeneracy"),
        &format!("rank {}, min singular value {:e}, analytic pair {omega} vs {hand}", value(&all, "nondegeneracy.rank"), value(&all, "nondegeneracy.min_singular_value")),
    );
    ledger.record(
        7,
        value(&all, "lifting.representable") <= 1e-10
            && value(&all, "lifting.mixed.direct") <= 1e-3
            && value(&all, "lifting.mixed.inductive") <= 1e-3
            && value(&all, "lifting.extension_normal") <= 1e-8
            && passed(&all, "lifting"),
        &format!(
            "representable {:e}, mixed direct {:e}, inductive {:e}, flow {:e}, normal derivative {:e}",
            value(&all, "lifting.representable"),
            value(&all, "lifting.mixed.direct"),
            value(&all, "lifting.mixed.inductive"),
            value(&all, "lifting.mixed.direct.flow"),
            value(&all, "lifting.extension_normal")
        ),
    );

    let chart = flag.realization().unwrap().chart.clone();
    let n = 32;
    let small = canonical_torus_flag(n).unwrap();
    let flags = [
        small.clone(),
        deformed_torus_flag(n, 0.3).unwrap(),
        bumped_torus_flag(n, 0.1).unwrap(),
        surface_flag_with_points(n, chart.clone(), &[vec![PI, 0.0], vec![PI, PI]]).unwrap(),
        surface_flag_with_points(n, chart, &[vec![0.0, 0.0]]).unwrap(),
        act_map(&small, Arc::new(Translation { offset: vec![0.0, 0.0, 0.5, 0.0] })).unwrap(),
    ];
    let probes: Vec<MixedForm> = trig_dictionary(4, 2).iter().map(|f| MixedForm::moment_probe(small.ambient(), f, &[0, 2]).unwrap()).collect();
    let mut separated = 0;
    let mut pairs = 0;
    for i in 0..flags.len() {
        for j in (i + 1)..flags.len() {
            pairs += 1;
            if separation_test(&flags[i], &flags[j], &probes, DEFAULT_SEPARATION_TOL).unwrap().verdict == Verdict::Separated {
                separated += 1;
            }
        }
    }
    ledger.record(8, separated == pairs, &format!("{separated} of {pairs} pairs among {} flags separated", flags.len()));

    let (_, again) = run(&["check", fx], &dir.path().join("check-b.json"));
    let strip = |v: &Value| {
        let mut v = v.clone();
        v.as_object_mut().unwrap().remove("timing");
        serde_json::to_string(&v).unwrap()
    };
    ledger.record(
        9,
        code == 0 && strip(&all) == strip(&again) && secs < 300.0,
        &format!("check all exit {code} in {secs:.1} s, reports identical: {}", strip(&all) == strip(&again)),
    );

    let failed: Vec<usize> = ledger.0.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria {failed:?}");
}
