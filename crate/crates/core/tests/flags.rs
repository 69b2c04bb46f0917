//! Scenario tests across modules on the standard flags.

use std::f64::consts::PI;
use std::sync::Arc;

use symflag_core::ambient::{hamiltonian_vector_field, trig_dictionary, FlowMap, FormField, ScalarField, Translation, Wave};
use symflag_core::currents::{separation_test, MixedForm, Verdict, DEFAULT_SEPARATION_TOL};
use symflag_core::flagmesh::builders::{bumped_torus_flag, canonical_torus_flag, deformed_torus_flag, jittered_torus_flag, surface_flag_with_points};
use symflag_core::flagmesh::{act_map, integrate_over_level, refine, validate_flag, FlagEmbedding, Geometry, QuadratureConfig, Thresholds};
use symflag_core::linalg::log_log_slope;

fn affine(flag: FlagEmbedding) -> FlagEmbedding {
    flag.with_quadrature(QuadratureConfig { geometry: Geometry::Affine, ..Default::default() }).unwrap()
}

#[test]
fn piecewise_linear_quadrature_converges_at_second_order() {
    let amb_form = FormField::basis(4, &[0, 1])
        .unwrap()
        .mul_scalar(&ScalarField::trig(1.0, Wave::Cos, vec![0, 0, 1, 0]).add(&ScalarField::trig(0.5, Wave::Sin, vec![1, 0, 0, 1])))
        .unwrap();
    let exact = integrate_over_level(&deformed_torus_flag(256, 0.6).unwrap(), 1, &amb_form).unwrap();
    let base = deformed_torus_flag(8, 0.6).unwrap();
    let mut errs = Vec::new();
    let mut hs = Vec::new();
    for factor in [2usize, 4, 8] {
        let fine = affine(refine(&base, factor).unwrap());
        errs.push(integrate_over_level(&fine, 1, &amb_form).unwrap() - exact);
        hs.push(1.0 / (8 * factor) as f64);
    }
    let slope = log_log_slope(&hs, &errs);
    assert!(slope >= 1.7, "slope {slope}, errors {errs:?}");
}

#[test]
fn regression_flags_are_pairwise_separated() {
    let n = 16;
    let canonical = canonical_torus_flag(n).unwrap();
    let chart = canonical.realization().unwrap().chart.clone();
    let flags = vec![
        canonical.clone(),
        deformed_torus_flag(n, 0.3).unwrap(),
        bumped_torus_flag(n, 0.1).unwrap(),
        surface_flag_with_points(n, chart.clone(), &[vec![PI, 0.0], vec![PI, PI]]).unwrap(),
        surface_flag_with_points(n, chart, &[vec![0.0, 0.0]]).unwrap(),
        act_map(&canonical, Arc::new(Translation { offset: vec![0.0, 0.0, 0.5, 0.0] })).unwrap(),
        jittered_torus_flag(n, 0.3, 0.2, 3).unwrap(),
    ];
    let probes: Vec<MixedForm> = trig_dictionary(4, 2)
        .iter()
        .map(|f| MixedForm::moment_probe(canonical.ambient(), f, &[0, 2]).unwrap())
        .collect();
    for a in 0..flags.len() {
        for b in (a + 1)..flags.len() {
            let s = separation_test(&flags[a], &flags[b], &probes, DEFAULT_SEPARATION_TOL).unwrap();
            let gap = s.differences.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            if (a, b) == (1, 6) {
                // another triangulation of the same surface: differences are quadrature error only
                assert!(gap <= 1e-6, "{gap}");
            } else {
                assert_eq!(s.verdict, Verdict::Separated, "flags {a} and {b}");
                assert!(gap > 1e-3, "flags {a} and {b}: {gap}");
            }
        }
    }
}

#[test]
fn hamiltonian_flows_keep_flags_valid() {
    let flag = canonical_torus_flag(32).unwrap();
    let h = ScalarField::trig(0.4, Wave::Cos, vec![1, 1, 1, 0]).add(&ScalarField::trig(0.3, Wave::Sin, vec![0, 1, 0, 1]));
    let x = hamiltonian_vector_field(flag.ambient(), &FormField::scalar(h)).unwrap();
    let moved = act_map(&flag, Arc::new(FlowMap::new(x, 1.0, 0.01).unwrap())).unwrap();
    let report = validate_flag(&moved, &Thresholds::default());
    assert!(report.is_valid(), "{report:?}");
    for (k, &v) in moved.inclusions()[0].vertex_map.iter().enumerate() {
        assert_eq!(moved.vertex_position(0, k), moved.vertex_position(1, v));
    }
}
