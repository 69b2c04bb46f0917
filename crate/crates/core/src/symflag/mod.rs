//! Symplectic flags: the form `Omega`, the moment map `J`, their identities,
//! and the Hamiltonian lifting of flag tangents.

mod lift;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ambient::{hamiltonian_vector_field, FlowMap, poisson_bracket, trig_dictionary, FormField, ScalarField, VectorField, Wave};
use crate::currents::{pair, MixedForm};
use crate::error::{Error, Result};
use crate::flagmesh::{infinitesimal_action, integrate_by_component, sample_level, sample_with_tangents, FlagEmbedding, FlagTangent};
use crate::linalg;
use crate::par;
use crate::transgression::{flow_derivative, transgress_value, DifferenceScheme, IdentityCheck, TransgressionSpec};

pub use lift::{
    extend_normal_flat, level_separation, lift_flow_check, lift_tangent, modes_agree, CoefficientTable, HamiltonianDictionary, LiftFlowReport, LiftMode, LiftReport,
    LiftedHamiltonian, NormalExtension, DEFAULT_DAMPING, MODE_AGREEMENT_FLOOR,
};

/// Cells with `|omega| <= threshold * volume` on their tangent plane count as degenerate.
pub const DEFAULT_SYMPLECTIC_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSymplecticity {
    pub level: usize,
    pub dim: usize,
    pub cells: usize,
    pub degenerate_cells: Vec<usize>,
    /// Smallest `|Pf(omega)| / volume` over the cells (1 for point levels).
    pub min_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymplecticReport {
    pub symplectic: bool,
    pub levels: Vec<LevelSymplecticity>,
}

fn odd_levels(flag: &FlagEmbedding) -> Result<()> {
    for (i, d) in flag.level_dims().into_iter().enumerate() {
        if d % 2 != 0 {
            return Err(Error::OddDimension { level: i, dim: d });
        }
    }
    Ok(())
}

/// Cellwise test that `omega` pulls back nondegenerately to every level.
pub fn is_symplectic_flag(flag: &FlagEmbedding, threshold: f64) -> Result<SymplecticReport> {
    odd_levels(flag)?;
    let amb = flag.ambient();
    let mut levels = Vec::new();
    for (i, mesh) in flag.levels().iter().enumerate() {
        let d = mesh.intrinsic_dim();
        let ratios: Vec<f64> = if d == 0 {
            Vec::new()
        } else {
            par::map_range(mesh.cells().len(), |c| {
                let cell = &mesh.cells()[c];
                let p0 = flag.vertex_position(i, cell[0]);
                let edges: Vec<Vec<f64>> = cell[1..].iter().map(|&v| amb.displacement(p0, flag.vertex_position(i, v))).collect();
                let w: Vec<Vec<f64>> = edges.iter().map(|a| edges.iter().map(|b| amb.omega(a, b)).collect()).collect();
                let g: Vec<Vec<f64>> = edges.iter().map(|a| edges.iter().map(|b| linalg::dot(a, b)).collect()).collect();
                let gram = linalg::det(&g);
                if gram <= 0.0 {
                    0.0
                } else {
                    (linalg::det(&w).abs() / gram).sqrt()
                }
            })
        };
        levels.push(LevelSymplecticity {
            level: i,
            dim: d,
            cells: ratios.len(),
            degenerate_cells: ratios.iter().enumerate().filter(|(_, &r)| r <= threshold).map(|(c, _)| c).collect(),
            min_ratio: ratios.iter().copied().fold(1.0, f64::min),
        });
    }
    Ok(SymplecticReport { symplectic: levels.iter().all(|l| l.degenerate_cells.is_empty()), levels })
}

/// Per-component signs making `int omega^k / k!` positive on level `i`.
pub fn liouville_orientation(flag: &FlagEmbedding, level: usize) -> Result<Vec<f64>> {
    flag.check_level(level)?;
    let mesh = flag.level(level);
    let d = mesh.intrinsic_dim();
    if d % 2 != 0 {
        return Err(Error::OddDimension { level, dim: d });
    }
    if d == 0 {
        return Ok(vec![1.0; mesh.n_components()]);
    }
    let k = d / 2;
    let fact: f64 = (1..=k).map(|j| j as f64).product();
    let vol = flag.ambient().omega_power(k).scale(1.0 / fact);
    integrate_by_component(flag, level, &vol)?
        .into_iter()
        .enumerate()
        .map(|(c, v)| {
            if v == 0.0 || !v.is_finite() {
                Err(Error::NotSymplectic(format!("component {c} of level {level} has zero symplectic volume")))
            } else {
                Ok(v.signum())
            }
        })
        .collect()
}

/// The flag with every level carrying its Liouville orientation.
pub fn liouville_oriented(flag: &FlagEmbedding) -> Result<FlagEmbedding> {
    let mut out = flag.clone();
    for i in 0..flag.n_levels() {
        let signs = liouville_orientation(flag, i)?;
        let combined = signs.iter().zip(flag.level(i).signs()).map(|(a, b)| a * b).collect();
        out = out.with_level_signs(i, combined)?;
    }
    Ok(out)
}

/// The transgression data `alpha_i = omega^{k_i + 1} / (k_i + 1)` of `Omega`.
pub fn omega_spec(flag: &FlagEmbedding) -> Result<TransgressionSpec> {
    odd_levels(flag)?;
    let amb = flag.ambient();
    let forms = flag.level_dims().iter().map(|d| amb.omega_power(d / 2 + 1).scale(1.0 / (d / 2 + 1) as f64)).collect();
    TransgressionSpec::new(flag, forms, 2)
}

/// `Omega(xi, eta)`; the flag is assumed Liouville-oriented.
pub fn flag_omega(flag: &FlagEmbedding, xi: &FlagTangent, eta: &FlagTangent) -> Result<f64> {
    transgress_value(&omega_spec(flag)?, flag, &[xi, eta])
}

/// `[Omega(frame_a, frame_b)]`, sampling every level once.
pub fn flag_omega_matrix(flag: &FlagEmbedding, frame: &[&FlagTangent]) -> Result<DMatrix<f64>> {
    let spec = omega_spec(flag)?;
    let m = frame.len();
    let mut g = DMatrix::zeros(m, m);
    for (i, form) in spec.forms().iter().enumerate() {
        let (samples, tv) = sample_with_tangents(flag, i, frame)?;
        let n = samples.ambient_dim;
        for a in 0..m {
            for b in (a + 1)..m {
                let v = samples.integrate_with(|q| {
                    let mut args: Vec<&[f64]> = vec![&tv[a][q * n..(q + 1) * n], &tv[b][q * n..(q + 1) * n]];
                    args.extend(samples.frame(q));
                    form.eval(samples.point(q), &args)
                });
                g[(a, b)] += v;
                g[(b, a)] -= v;
            }
        }
    }
    Ok(g)
}

/// `<J(flag), f> = sum_i int_{N_i} f omega^{k_i}`.
pub fn moment_pairing(flag: &FlagEmbedding, f: &ScalarField) -> Result<f64> {
    pair(flag, &MixedForm::moment_probe(flag.ambient(), f, &flag.level_dims())?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl MomentVector {
    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|k| self.values[k])
    }
}

pub fn moment_vector(flag: &FlagEmbedding, dictionary: &[ScalarField]) -> Result<MomentVector> {
    let names = flag.ambient().coordinate_names();
    let values = par::try_map_range(dictionary.len(), |k| moment_pairing(flag, &dictionary[k]))?;
    Ok(MomentVector { labels: dictionary.iter().map(|f| f.label(&names)).collect(), values })
}

/// `<J, f>` for every probe at `samples + 1` equally spaced times along the
/// flow of `x` up to `t`. Quadrature points and frames are transported by the
/// flow itself, so curved flags keep their exact geometry.
pub fn moment_trajectory(flag: &FlagEmbedding, x: &VectorField, t: f64, dt: f64, samples: usize, probes: &[ScalarField]) -> Result<Vec<(f64, Vec<f64>)>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("a trajectory needs at least one interval".into()));
    }
    let dims = flag.level_dims();
    let probe_forms = probes.iter().map(|f| MixedForm::moment_probe(flag.ambient(), f, &dims)).collect::<Result<Vec<_>>>()?;
    let mut levels = (0..flag.n_levels()).map(|i| sample_level(flag, i, &[])).collect::<Result<Vec<_>>>()?;
    let step = FlowMap::new(x.clone(), t / samples as f64, dt)?;
    let mut out = Vec::with_capacity(samples + 1);
    for k in 0..=samples {
        if k > 0 {
            levels = levels.iter().map(|s| s.mapped(&step)).collect::<Result<Vec<_>>>()?;
        }
        let values = probe_forms
            .iter()
            .map(|p| {
                levels.iter().try_fold(0.0, |acc, s| {
                    let form = p.component(s.dim).ok_or(Error::DegreeMismatch { expected: s.dim, got: 0 })?;
                    Ok::<f64, Error>(acc + s.integrate(form)?)
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push((t * k as f64 / samples as f64, values));
    }
    Ok(out)
}

fn ham(flag: &FlagEmbedding, f: &ScalarField) -> Result<VectorField> {
    hamiltonian_vector_field(flag.ambient(), &FormField::scalar(f.clone()))
}

fn bracket(flag: &FlagEmbedding, f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
    poisson_bracket(flag.ambient(), &FormField::scalar(f.clone()), &FormField::scalar(g.clone()))?
        .as_scalar()
        .ok_or_else(|| Error::Unsupported("bracket of non-symbolic functions".into()))
}

/// `Omega(zeta_{X_f}, zeta_X)` against the derivative of `<J, f>` along the flow of `X`.
pub fn hamiltonian_pairing_identity(
    flag: &FlagEmbedding,
    f: &ScalarField,
    x: &VectorField,
    dt: f64,
    scheme: DifferenceScheme,
) -> Result<IdentityCheck> {
    let lhs = flag_omega(flag, &infinitesimal_action(flag, &ham(flag, f)?), &infinitesimal_action(flag, x))?;
    let rhs = flow_derivative(flag, x, dt, scheme, |fl, _| moment_pairing(fl, f))?;
    Ok(IdentityCheck::new(lhs, rhs))
}

/// Derivative of `<J, f>` along the flow of `X_g` against `<J, {f, g}>`.
pub fn equivariance_check(flag: &FlagEmbedding, f: &ScalarField, g: &ScalarField, dt: f64, scheme: DifferenceScheme) -> Result<IdentityCheck> {
    let lhs = flow_derivative(flag, &ham(flag, g)?, dt, scheme, |fl, _| moment_pairing(fl, f))?;
    let rhs = moment_pairing(flag, &bracket(flag, f, g)?)?;
    Ok(IdentityCheck::new(lhs, rhs))
}

/// `Omega(zeta_{X_f}, zeta_{X_g})` against `<J, {f, g}>`.
pub fn kks_check(flag: &FlagEmbedding, f: &ScalarField, g: &ScalarField) -> Result<IdentityCheck> {
    let (xf, xg) = (ham(flag, f)?, ham(flag, g)?);
    let lhs = flag_omega(flag, &infinitesimal_action(flag, &xf), &infinitesimal_action(flag, &xg))?;
    let rhs = moment_pairing(flag, &bracket(flag, f, g)?)?;
    Ok(IdentityCheck::new(lhs, rhs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub size: usize,
    pub rank: usize,
    pub min_singular_value: f64,
    pub singular_values: Vec<f64>,
}

/// Relative cut below which singular values of the `Omega` Gram matrix count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Rank and smallest singular value of `Omega` restricted to the frame.
pub fn nondegeneracy_probe(flag: &FlagEmbedding, frame: &[&FlagTangent]) -> Result<NondegeneracyReport> {
    if frame.is_empty() {
        return Err(Error::DegenerateFrame("empty frame".into()));
    }
    let flat: Vec<Vec<f64>> = frame.iter().map(|t| t.values().iter().flatten().flatten().copied().collect()).collect();
    let len = flat[0].len();
    let span = linalg::orthonormal_span(&flat, len, frame.len(), 1e-10);
    if span.len() < frame.len() {
        return Err(Error::DegenerateFrame(format!("{} of {} frame vectors are independent", span.len(), frame.len())));
    }
    let g = flag_omega_matrix(flag, frame)?;
    let mut sv: Vec<f64> = g.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let cut = RANK_TOL * sv[0].max(1.0);
    Ok(NondegeneracyReport {
        size: frame.len(),
        rank: sv.iter().filter(|&&s| s > cut).count(),
        min_singular_value: *sv.last().unwrap(),
        singular_values: sv,
    })
}

/// A random trig vector field with frequencies up to `cap` and normal coefficients.
pub fn random_trig_field(dim: usize, cap: u32, terms: usize, rng: &mut impl Rng) -> VectorField {
    let dict = trig_dictionary(dim, cap);
    VectorField::symbolic(
        (0..dim)
            .map(|_| {
                let mut c = ScalarField::zero(dim);
                for _ in 0..terms {
                    let f = &dict[rng.random_range(0..dict.len())];
                    c = c.add(&f.scale(rng.random_range(-1.0..1.0)));
                }
                c
            })
            .collect(),
    )
}

/// A random trig function with frequencies up to `cap`.
pub fn random_trig_function(dim: usize, cap: u32, terms: usize, rng: &mut impl Rng) -> ScalarField {
    let mut f = ScalarField::zero(dim);
    for _ in 0..terms {
        let freq: Vec<i32> = loop {
            let m: Vec<i32> = (0..dim).map(|_| rng.random_range(-(cap as i32)..=cap as i32)).collect();
            if m.iter().map(|v| v.unsigned_abs()).sum::<u32>() <= cap {
                break m;
            }
        };
        let wave = if rng.random_bool(0.5) { Wave::Cos } else { Wave::Sin };
        f = f.add(&ScalarField::trig(rng.random_range(-1.0..1.0), wave, freq));
    }
    f
}

/// A random `degree`-form on `R^dim` whose components are random trig functions.
pub fn random_trig_form(dim: usize, degree: usize, cap: u32, terms: usize, rng: &mut impl Rng) -> Result<FormField> {
    if degree > dim {
        return Err(Error::DegreeMismatch { expected: dim, got: degree });
    }
    let mut comps = Vec::new();
    let mut idx: Vec<usize> = (0..degree).collect();
    loop {
        comps.push((idx.clone(), random_trig_function(dim, cap, terms, rng)));
        // next increasing index tuple
        let mut k = degree;
        while k > 0 && idx[k - 1] == dim - degree + k - 1 {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        idx[k - 1] += 1;
        for j in k..degree {
            idx[j] = idx[j - 1] + 1;
        }
    }
    FormField::symbolic(dim, degree, comps)
}

/// `m` infinitesimal actions of random trig fields, reproducible from `seed`.
pub fn random_compatible_frame(flag: &FlagEmbedding, m: usize, seed: u64) -> Vec<FlagTangent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m).map(|_| infinitesimal_action(flag, &random_trig_field(flag.ambient().dim(), 2, 3, &mut rng))).collect()
}
