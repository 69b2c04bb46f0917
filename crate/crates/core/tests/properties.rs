//! Property tests over random trig data.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use symflag_core::ambient::{exterior_derivative, hamiltonian_vector_field, AmbientSpace, FormField, ScalarField, Wave};
use symflag_core::currents::{pair, MixedForm};
use symflag_core::flagmesh::builders::deformed_torus_flag;
use symflag_core::flagmesh::{triangle_rule, FlagEmbedding};
use symflag_core::par;
use symflag_core::symflag::{flag_omega, moment_pairing, random_compatible_frame, random_trig_function};
use symflag_core::transgression::{transgress_value, TransgressionSpec};

fn trig_term() -> impl Strategy<Value = (f64, bool, Vec<i32>)> {
    (-1.0f64..1.0, any::<bool>(), prop::collection::vec(-2i32..=2, 4))
}

fn trig_field() -> impl Strategy<Value = ScalarField> {
    prop::collection::vec(trig_term(), 1..4).prop_map(|terms| {
        terms.into_iter().fold(ScalarField::zero(4), |acc, (c, cos, m)| {
            acc.add(&ScalarField::trig(c, if cos { Wave::Cos } else { Wave::Sin }, m))
        })
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 4)
}

fn small_flag() -> FlagEmbedding {
    deformed_torus_flag(12, 0.3).unwrap()
}

proptest! {
    #[test]
    fn wrap_lands_in_the_fundamental_domain(mut x in point()) {
        let t = AmbientSpace::standard_torus(4).unwrap();
        t.wrap(&mut x);
        let once = x.clone();
        t.wrap(&mut x);
        for (a, b) in once.iter().zip(&x) {
            prop_assert!((0.0..2.0 * std::f64::consts::PI).contains(a));
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn hamiltonian_fields_contract_to_df(f in trig_field(), x in point(), v in point()) {
        let amb = AmbientSpace::standard_torus(4).unwrap();
        let xf = hamiltonian_vector_field(&amb, &FormField::scalar(f.clone())).unwrap();
        let lhs = amb.omega(&xf.eval(&x), &v);
        let rhs: f64 = f.gradient(&x).iter().zip(&v).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn d_squared_vanishes(f in trig_field(), g in trig_field(), x in point()) {
        let one = FormField::symbolic(4, 1, vec![(vec![0], f), (vec![3], g)]).unwrap();
        let dd = exterior_derivative(&exterior_derivative(&one, 1e-5).unwrap(), 1e-5).unwrap();
        let e: Vec<Vec<f64>> = (0..3).map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.5 }).collect()).collect();
        let refs: Vec<&[f64]> = e.iter().map(|v| v.as_slice()).collect();
        prop_assert!(dd.eval(&x, &refs).abs() <= 1e-12);
    }

    #[test]
    fn parallel_and_sequential_sums_agree(values in prop::collection::vec(-1e6f64..1e6, 1..2000)) {
        let a = par::sum_range(values.len(), |i| values[i]);
        par::set_sequential(true);
        let b = par::sum_range(values.len(), |i| values[i]);
        par::set_sequential(false);
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn triangle_rules_integrate_monomials(p in 0u32..=5, q in 0u32..=5) {
        // int over the unit triangle of x^p y^q = p! q! / (p + q + 2)!
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        let exact = fact(p) * fact(q) / fact(p + q + 2);
        for degree in [1usize, 2, 5] {
            if p + q > degree as u32 {
                continue;
            }
            let rule = triangle_rule(degree).unwrap();
            let approx: f64 = rule.iter().map(|(b, w)| 0.5 * w * b[1].powi(p as i32) * b[2].powi(q as i32)).sum();
            prop_assert!((approx - exact).abs() <= 1e-14);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn moment_pairing_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let flag = small_flag();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_trig_function(4, 2, 3, &mut rng);
        let g = random_trig_function(4, 2, 3, &mut rng);
        let lhs = moment_pairing(&flag, &f.scale(a).add(&g.scale(b))).unwrap();
        let rhs = a * moment_pairing(&flag, &f).unwrap() + b * moment_pairing(&flag, &g).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn pairing_is_linear(seed in any::<u64>(), a in -3.0f64..3.0) {
        let flag = small_flag();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_trig_function(4, 2, 3, &mut rng);
        let g = random_trig_function(4, 2, 3, &mut rng);
        let mix = |h: &ScalarField| MixedForm::new(4, vec![
            FormField::scalar(h.clone()),
            FormField::basis(4, &[0, 1]).unwrap().mul_scalar(h).unwrap(),
        ]).unwrap();
        let lhs = pair(&flag, &mix(&f.add(&g.scale(a)))).unwrap();
        let rhs = pair(&flag, &mix(&f)).unwrap() + a * pair(&flag, &mix(&g)).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn flag_omega_is_antisymmetric(seed in any::<u64>()) {
        let flag = small_flag();
        let frame = random_compatible_frame(&flag, 2, seed);
        let ab = flag_omega(&flag, &frame[0], &frame[1]).unwrap();
        let ba = flag_omega(&flag, &frame[1], &frame[0]).unwrap();
        prop_assert!((ab + ba).abs() <= 1e-12 * (1.0 + ab.abs()));
        prop_assert!(flag_omega(&flag, &frame[0], &frame[0]).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn transgression_is_multilinear(seed in any::<u64>(), s in -2.0f64..2.0) {
        let flag = small_flag();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_trig_function(4, 2, 2, &mut rng);
        let forms = vec![
            FormField::basis(4, &[1]).unwrap().mul_scalar(&f).unwrap(),
            FormField::basis(4, &[0, 2, 3]).unwrap().mul_scalar(&f).unwrap(),
        ];
        let spec = TransgressionSpec::new(&flag, forms, 1).unwrap();
        let frame = random_compatible_frame(&flag, 2, seed ^ 1);
        let combo = frame[0].scale(s).add(&frame[1]);
        let lhs = transgress_value(&spec, &flag, &[&combo]).unwrap();
        let rhs = s * transgress_value(&spec, &flag, &[&frame[0]]).unwrap() + transgress_value(&spec, &flag, &[&frame[1]]).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }
}
