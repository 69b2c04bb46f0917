//! Transgression of ambient forms to forms on flag space,
//! `alpha~(xi_1..xi_l) = sum_i int_{N_i} i_{xi_l} .. i_{xi_1} alpha_i`,
//! and finite-difference checks of its calculus along ambient flows.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ambient::{interior_product, lie_derivative, exterior_derivative, AmbientMap, FlowMap, FormField, VectorField, DEFAULT_FD_STEP};
use crate::error::{Error, Result};
use crate::flagmesh::{act_map, infinitesimal_action, push_tangent, sample_with_tangents, FlagEmbedding, FlagTangent};

/// Largest RK4 step used when flowing flags inside the checks.
pub const FLOW_SUBSTEP: f64 = 1e-2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifferenceScheme {
    Forward,
    #[default]
    Central,
}

/// One form per level with `degree(alpha_i) = dim(N_i) + excess`.
#[derive(Clone, Debug)]
pub struct TransgressionSpec {
    forms: Vec<FormField>,
    excess: usize,
}

impl TransgressionSpec {
    pub fn new(flag: &FlagEmbedding, forms: Vec<FormField>, excess: usize) -> Result<Self> {
        if forms.len() != flag.n_levels() {
            return Err(Error::InvalidArgument(format!("{} forms for {} levels", forms.len(), flag.n_levels())));
        }
        for (i, f) in forms.iter().enumerate() {
            let want = flag.level(i).intrinsic_dim() + excess;
            if f.degree() != want {
                return Err(Error::DegreeMismatch { expected: want, got: f.degree() });
            }
            if f.dim() != flag.ambient().dim() {
                return Err(Error::DimensionMismatch { expected: flag.ambient().dim(), got: f.dim() });
            }
        }
        Ok(TransgressionSpec { forms, excess })
    }

    pub fn forms(&self) -> &[FormField] {
        &self.forms
    }

    pub fn excess(&self) -> usize {
        self.excess
    }

    /// `alpha_i -> op(alpha_i)` with the excess degree shifted by `shift`.
    fn map_forms(&self, shift: isize, op: impl Fn(&FormField) -> Result<FormField>) -> Result<TransgressionSpec> {
        let forms = self.forms.iter().map(op).collect::<Result<Vec<_>>>()?;
        Ok(TransgressionSpec { forms, excess: (self.excess as isize + shift) as usize })
    }

    pub fn exterior_derivative(&self, step: f64) -> Result<TransgressionSpec> {
        self.map_forms(1, |f| exterior_derivative(f, step))
    }

    pub fn contract(&self, x: &VectorField) -> Result<TransgressionSpec> {
        if self.excess == 0 {
            return Err(Error::ZeroDegreeContraction);
        }
        self.map_forms(-1, |f| interior_product(f, x))
    }

    pub fn lie_derivative(&self, x: &VectorField, step: f64) -> Result<TransgressionSpec> {
        self.map_forms(0, |f| lie_derivative(f, x, step))
    }

    pub fn pullback_affine(&self, a: &[Vec<f64>], b: &[f64]) -> Result<TransgressionSpec> {
        self.map_forms(0, |f| f.pullback_affine(a, b))
    }
}

/// `alpha~(xi_1, .., xi_l)`. Tangents are assumed compatible.
pub fn transgress_value(spec: &TransgressionSpec, flag: &FlagEmbedding, tangents: &[&FlagTangent]) -> Result<f64> {
    if tangents.len() != spec.excess {
        return Err(Error::DegreeMismatch { expected: spec.excess, got: tangents.len() });
    }
    if spec.forms.len() != flag.n_levels() {
        return Err(Error::InvalidArgument(format!("{} forms for {} levels", spec.forms.len(), flag.n_levels())));
    }
    let mut total = 0.0;
    for (i, form) in spec.forms.iter().enumerate() {
        if form.is_zero() {
            continue;
        }
        let (samples, tv) = sample_with_tangents(flag, i, tangents)?;
        let n = samples.ambient_dim;
        total += samples.integrate_with(|q| {
            let mut args: Vec<&[f64]> = tv.iter().map(|t| &t[q * n..(q + 1) * n]).collect();
            args.extend(samples.frame(q));
            form.eval(samples.point(q), &args)
        });
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

impl IdentityCheck {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        IdentityCheck { lhs, rhs, residual: (lhs - rhs).abs() }
    }
}

/// The flag moved by the time-`t` flow of `x`.
pub fn flowed(flag: &FlagEmbedding, x: &VectorField, t: f64) -> Result<(FlagEmbedding, Arc<dyn AmbientMap>)> {
    let map: Arc<dyn AmbientMap> = Arc::new(FlowMap::new(x.clone(), t, FLOW_SUBSTEP)?);
    Ok((act_map(flag, map.clone())?, map))
}

/// Derivative of `g` along the flow of `x` at time 0.
pub fn flow_derivative<G>(flag: &FlagEmbedding, x: &VectorField, step: f64, scheme: DifferenceScheme, g: G) -> Result<f64>
where
    G: Fn(&FlagEmbedding, Option<&dyn AmbientMap>) -> Result<f64>,
{
    let (fwd, map_f) = flowed(flag, x, step)?;
    let gf = g(&fwd, Some(map_f.as_ref()))?;
    match scheme {
        DifferenceScheme::Forward => Ok((gf - g(flag, None)?) / step),
        DifferenceScheme::Central => {
            let (bwd, map_b) = flowed(flag, x, -step)?;
            Ok((gf - g(&bwd, Some(map_b.as_ref()))?) / (2.0 * step))
        }
    }
}

/// `d(alpha~) = (d alpha)~` along flows: for `l = 0` the derivative of
/// `alpha~` along `zeta_X`; for `l = 1` the coordinate formula
/// `X(alpha~(Y)) - Y(alpha~(X)) - alpha~([X, Y])` with `[zeta_X, zeta_Y] = zeta_[X,Y]`.
pub fn check_d_identity(
    spec: &TransgressionSpec,
    flag: &FlagEmbedding,
    x: &VectorField,
    y: Option<&VectorField>,
    step: f64,
    scheme: DifferenceScheme,
) -> Result<IdentityCheck> {
    let dspec = spec.exterior_derivative(DEFAULT_FD_STEP)?;
    match spec.excess {
        0 => {
            let lhs = flow_derivative(flag, x, step, scheme, |f, _| transgress_value(spec, f, &[]))?;
            let zx = infinitesimal_action(flag, x);
            let rhs = transgress_value(&dspec, flag, &[&zx])?;
            Ok(IdentityCheck::new(lhs, rhs))
        }
        1 => {
            let y = y.ok_or_else(|| Error::InvalidArgument("the 1-form case needs a second vector field".into()))?;
            let along = |a: &VectorField, b: &VectorField| {
                flow_derivative(flag, a, step, scheme, |f, _| transgress_value(spec, f, &[&infinitesimal_action(f, b)]))
            };
            let xy = along(x, y)?;
            let yx = along(y, x)?;
            let zb = infinitesimal_action(flag, &x.bracket(y));
            let lhs = xy - yx - transgress_value(spec, flag, &[&zb])?;
            let (zx, zy) = (infinitesimal_action(flag, x), infinitesimal_action(flag, y));
            let rhs = transgress_value(&dspec, flag, &[&zx, &zy])?;
            Ok(IdentityCheck::new(lhs, rhs))
        }
        l => Err(Error::Unsupported(format!("d-identity check for excess degree {l}"))),
    }
}

/// `i_{zeta_X} alpha~ = (i_X alpha)~` on the given remaining tangents.
pub fn check_contraction_identity(
    spec: &TransgressionSpec,
    flag: &FlagEmbedding,
    x: &VectorField,
    tangents: &[&FlagTangent],
) -> Result<IdentityCheck> {
    let zx = infinitesimal_action(flag, x);
    let mut args = vec![&zx];
    args.extend_from_slice(tangents);
    let lhs = transgress_value(spec, flag, &args)?;
    let rhs = transgress_value(&spec.contract(x)?, flag, tangents)?;
    Ok(IdentityCheck::new(lhs, rhs))
}

/// `L_{zeta_X} alpha~ = (L_X alpha)~`: difference quotient of `alpha~` along
/// the flow with the tangents transported by the flow's pushforward.
pub fn check_lie_identity(
    spec: &TransgressionSpec,
    flag: &FlagEmbedding,
    x: &VectorField,
    tangents: &[&FlagTangent],
    dt: f64,
    scheme: DifferenceScheme,
) -> Result<IdentityCheck> {
    let lhs = flow_derivative(flag, x, dt, scheme, |f, map| match map {
        None => transgress_value(spec, f, tangents),
        Some(m) => {
            let pushed = tangents.iter().map(|t| push_tangent(flag, t, m)).collect::<Result<Vec<_>>>()?;
            let refs: Vec<&FlagTangent> = pushed.iter().collect();
            transgress_value(spec, f, &refs)
        }
    })?;
    let rhs = transgress_value(&spec.lie_derivative(x, DEFAULT_FD_STEP)?, flag, tangents)?;
    Ok(IdentityCheck::new(lhs, rhs))
}

/// `alpha~(Phi . N; Phi_* xi) = (Phi^* alpha)~(N; xi)` for affine `Phi`.
pub fn diff_equivariance_check(
    spec: &TransgressionSpec,
    flag: &FlagEmbedding,
    map: Arc<dyn AmbientMap>,
    tangents: &[&FlagTangent],
) -> Result<IdentityCheck> {
    let (a, b) = map.affine().ok_or_else(|| Error::Unsupported("equivariance check needs an affine map with analytic pullback".into()))?;
    let moved = act_map(flag, map.clone())?;
    let pushed = tangents.iter().map(|t| push_tangent(flag, t, map.as_ref())).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&FlagTangent> = pushed.iter().collect();
    let lhs = transgress_value(spec, &moved, &refs)?;
    let rhs = transgress_value(&spec.pullback_affine(&a, &b)?, flag, tangents)?;
    Ok(IdentityCheck::new(lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::{hamiltonian_vector_field, AmbientSpace, LinearMap, ScalarField, Translation, Wave};
    use crate::flagmesh::builders::{canonical_torus_flag, deformed_torus_flag};
    use crate::flagmesh::{tangent_bases, FlagTangent};
    use crate::linalg;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn e(j: usize) -> Vec<f64> {
        let mut v = vec![0.0; 4];
        v[j] = 1.0;
        v
    }

    fn random_trig(rng: &mut ChaCha8Rng, nvars: usize) -> ScalarField {
        let mut f = ScalarField::zero(nvars);
        for _ in 0..3 {
            let freq: Vec<i32> = (0..nvars).map(|_| rng.random_range(-2..=2)).collect();
            let wave = if rng.random_bool(0.5) { Wave::Cos } else { Wave::Sin };
            f = f.add(&ScalarField::trig(rng.random_range(-0.5..0.5), wave, freq));
        }
        f
    }

    fn random_form(rng: &mut ChaCha8Rng, degree: usize) -> FormField {
        let mut comps = Vec::new();
        let all: Vec<Vec<usize>> = subsets(4, degree);
        for idx in all {
            comps.push((idx, random_trig(rng, 4)));
        }
        FormField::symbolic(4, degree, comps).unwrap()
    }

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for first in 0..n {
            for rest in subsets(n, k - 1) {
                if rest.first().is_none_or(|&r| r > first) {
                    let mut v = vec![first];
                    v.extend(rest);
                    out.push(v);
                }
            }
        }
        out
    }

    fn random_field(rng: &mut ChaCha8Rng) -> VectorField {
        VectorField::symbolic((0..4).map(|_| random_trig(rng, 4)).collect())
    }

    fn generic_spec(flag: &FlagEmbedding, rng: &mut ChaCha8Rng, excess: usize) -> TransgressionSpec {
        let forms = flag.level_dims().iter().map(|d| random_form(rng, d + excess)).collect();
        TransgressionSpec::new(flag, forms, excess).unwrap()
    }

    fn random_tangent(flag: &FlagEmbedding, rng: &mut ChaCha8Rng) -> FlagTangent {
        let t = infinitesimal_action(flag, &random_field(rng));
        let offsets: Vec<Vec<Vec<f64>>> = (0..flag.n_levels())
            .map(|i| {
                tangent_bases(flag, i)
                    .unwrap()
                    .iter()
                    .map(|b| {
                        let mut o = vec![0.0; 4];
                        for v in b {
                            linalg::axpy(&mut o, rng.random_range(-1.0..1.0), v);
                        }
                        o
                    })
                    .collect()
            })
            .collect();
        t.with_tangential_offsets(&offsets)
    }

    #[test]
    fn excess_zero_is_a_plain_integral() {
        let flag = canonical_torus_flag(64).unwrap();
        let spec = TransgressionSpec::new(&flag, vec![FormField::zero(4, 0), FormField::basis(4, &[0, 1]).unwrap()], 0).unwrap();
        assert_abs_diff_eq!(transgress_value(&spec, &flag, &[]).unwrap(), 4.0 * PI * PI, epsilon = 1e-10);
    }

    #[test]
    fn degree_mismatch_is_rejected() {
        let flag = canonical_torus_flag(8).unwrap();
        assert!(TransgressionSpec::new(&flag, vec![FormField::zero(4, 1), FormField::zero(4, 2)], 1).is_err());
    }

    #[test]
    fn multilinear_and_alternating() {
        let flag = deformed_torus_flag(16, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = generic_spec(&flag, &mut rng, 2);
        let zero = FlagTangent::zero(&flag);
        for _ in 0..20 {
            let (a, b) = (random_tangent(&flag, &mut rng), random_tangent(&flag, &mut rng));
            let ab = transgress_value(&spec, &flag, &[&a, &b]).unwrap();
            let ba = transgress_value(&spec, &flag, &[&b, &a]).unwrap();
            assert!((ab + ba).abs() <= 1e-10 * ab.abs().max(1.0));
            assert_eq!(transgress_value(&spec, &flag, &[&a, &zero]).unwrap(), 0.0);
            let a2 = a.scale(2.5).add(&b.scale(-1.0));
            let lin = transgress_value(&spec, &flag, &[&a2, &b]).unwrap();
            assert!((lin - 2.5 * ab).abs() <= 1e-10 * ab.abs().max(1.0));
        }
    }

    #[test]
    fn representatives_do_not_matter() {
        // flat levels: interpolated tangential offsets stay tangential inside cells
        let flag = canonical_torus_flag(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = generic_spec(&flag, &mut rng, 2);
        for _ in 0..10 {
            let a = random_tangent(&flag, &mut rng).without_generator();
            let b = random_tangent(&flag, &mut rng).without_generator();
            let v0 = transgress_value(&spec, &flag, &[&a, &b]).unwrap();
            let joined = crate::flagmesh::normal_representative(&flag, &a).unwrap();
            let v1 = transgress_value(&spec, &flag, &[&joined, &b]).unwrap();
            assert!((v0 - v1).abs() <= 1e-10 * v0.abs().max(1.0), "{v0} vs {v1}");
        }
    }

    #[test]
    fn contraction_identity_is_exact() {
        let flag = canonical_torus_flag(64).unwrap();
        let amb = flag.ambient().clone();
        // l = 2: alpha = (omega, omega^2/2), the forms behind the flag symplectic form
        let spec = TransgressionSpec::new(&flag, vec![amb.omega_form(), amb.omega_power(2).scale(0.5)], 2).unwrap();
        let zy2 = infinitesimal_action(&flag, &VectorField::constant(e(3)));
        let c = check_contraction_identity(&spec, &flag, &VectorField::constant(e(2)), &[&zy2]).unwrap();
        assert!(c.residual <= 1e-12);
        assert_abs_diff_eq!(c.lhs, 2.0 + 4.0 * PI * PI, epsilon = 1e-9);
        let z = check_contraction_identity(&spec, &flag, &VectorField::zero(4), &[&zy2]).unwrap();
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let spec1 = generic_spec(&flag, &mut rng, 1);
        for _ in 0..10 {
            let c = check_contraction_identity(&spec1, &flag, &random_field(&mut rng), &[]).unwrap();
            assert!(c.residual <= 1e-10, "{c:?}");
        }
    }

    #[test]
    fn d_identity_for_closed_forms() {
        let flag = canonical_torus_flag(32).unwrap();
        let amb = flag.ambient().clone();
        let spec = TransgressionSpec::new(&flag, vec![FormField::constant(4, 1, &[(vec![2], 0.5)]).unwrap(), amb.omega_power(1).wedge(&FormField::basis(4, &[3]).unwrap()).unwrap()], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (x, y) = (random_field(&mut rng), random_field(&mut rng));
        let c = check_d_identity(&spec, &flag, &x, Some(&y), 1e-3, DifferenceScheme::Central).unwrap();
        assert!(c.residual <= 1e-4, "{c:?}");
    }

    #[test]
    fn d_identity_sin_area_along_x1() {
        let flag = canonical_torus_flag(64).unwrap();
        let alpha = FormField::basis(4, &[0, 1]).unwrap().mul_scalar(&ScalarField::trig(1.0, Wave::Sin, vec![1, 0, 0, 0])).unwrap();
        let spec = TransgressionSpec::new(&flag, vec![FormField::zero(4, 0), alpha], 0).unwrap();
        let c = check_d_identity(&spec, &flag, &VectorField::constant(e(0)), None, 1e-3, DifferenceScheme::Central).unwrap();
        assert!(c.lhs.abs() <= 1e-6 && c.rhs.abs() <= 1e-6, "{c:?}");
    }

    #[test]
    fn d_identity_converges_for_generic_data() {
        let flag = deformed_torus_flag(32, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for excess in [0usize, 1] {
            let spec = generic_spec(&flag, &mut rng, excess);
            let (x, y) = (random_field(&mut rng), random_field(&mut rng));
            let steps = [4e-3, 2e-3, 1e-3];
            let res: Vec<f64> = steps
                .iter()
                .map(|&h| check_d_identity(&spec, &flag, &x, Some(&y), h, DifferenceScheme::Central).unwrap().residual)
                .collect();
            assert!(res[2] <= 1e-4, "excess {excess}: {res:?}");
            let slope = linalg::log_log_slope(&steps, &res);
            assert!(slope >= 0.7, "excess {excess}: slope {slope}, {res:?}");
        }
    }

    #[test]
    fn lie_identity_symmetry_cases() {
        let flag = canonical_torus_flag(64).unwrap();
        let amb = flag.ambient().clone();
        let spec = TransgressionSpec::new(&flag, vec![FormField::zero(4, 0), amb.omega_form()], 0).unwrap();
        let c = check_lie_identity(&spec, &flag, &VectorField::constant(vec![1.0, 0.5, 0.0, -0.2]), &[], 1e-3, DifferenceScheme::Forward).unwrap();
        assert!(c.residual <= 1e-8, "{c:?}");
        let alpha = FormField::basis(4, &[0, 1]).unwrap().mul_scalar(&ScalarField::trig(1.0, Wave::Cos, vec![1, 0, 0, 0])).unwrap();
        let spec = TransgressionSpec::new(&flag, vec![FormField::zero(4, 0), alpha], 0).unwrap();
        let c = check_lie_identity(&spec, &flag, &VectorField::constant(e(0)), &[], 1e-3, DifferenceScheme::Central).unwrap();
        assert!(c.lhs.abs() <= 1e-6 && c.rhs.abs() <= 1e-6, "{c:?}");
    }

    #[test]
    fn lie_identity_orders() {
        let flag = deformed_torus_flag(32, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for excess in [0usize, 1] {
            let spec = generic_spec(&flag, &mut rng, excess);
            let x = hamiltonian_vector_field(flag.ambient(), &FormField::scalar(random_trig(&mut rng, 4))).unwrap();
            let t = random_tangent(&flag, &mut rng);
            let args: Vec<&FlagTangent> = if excess == 1 { vec![&t] } else { vec![] };
            let steps = [4e-3, 2e-3, 1e-3];
            for (scheme, order) in [(DifferenceScheme::Forward, 1.0), (DifferenceScheme::Central, 2.0)] {
                let res: Vec<f64> = steps.iter().map(|&h| check_lie_identity(&spec, &flag, &x, &args, h, scheme).unwrap().residual).collect();
                let slope = linalg::log_log_slope(&steps, &res);
                assert!((slope - order).abs() <= 0.3, "excess {excess} {scheme:?}: slope {slope} {res:?}");
                if scheme == DifferenceScheme::Central {
                    assert!(res[2] <= 1e-4, "{res:?}");
                }
            }
        }
    }

    #[test]
    fn equivariance_under_affine_maps() {
        let flag = canonical_torus_flag(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let spec = generic_spec(&flag, &mut rng, 1);
        let t = random_tangent(&flag, &mut rng);
        let id = diff_equivariance_check(&spec, &flag, Arc::new(Translation { offset: vec![0.0; 4] }), &[&t]).unwrap();
        assert_eq!(id.residual, 0.0);
        let amb = AmbientSpace::standard_torus(4).unwrap();
        let const_spec = TransgressionSpec::new(&flag, vec![FormField::constant(4, 1, &[(vec![3], 1.0)]).unwrap(), amb.omega_power(1).wedge(&FormField::basis(4, &[2]).unwrap()).unwrap()], 1).unwrap();
        let tr = diff_equivariance_check(&const_spec, &flag, Arc::new(Translation { offset: vec![0.3, 1.0, 0.2, 0.0] }), &[&t]).unwrap();
        assert!(tr.residual <= 1e-12, "{tr:?}");
        let shear = LinearMap::new(
            vec![vec![1.0, 0.0, 0.0, 0.0], vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0, 1.0]],
            vec![0.1, 0.0, 0.0, 0.2],
        )
        .unwrap();
        assert!(shear.preserves(amb.omega_matrix()));
        let c = diff_equivariance_check(&spec, &flag, Arc::new(shear), &[&t]).unwrap();
        assert!(c.residual <= 1e-8, "{c:?}");
        let flow = FlowMap::new(VectorField::zero(4), 1.0, 0.1).unwrap();
        assert!(diff_equivariance_check(&spec, &flag, Arc::new(flow), &[&t]).is_err());
    }
}
