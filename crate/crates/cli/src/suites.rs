//! The `check` suites. Each returns report rows; a check that errors out is
//! a failed row, not an input error.

use clap::ValueEnum;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use symflag_core::ambient::{hamiltonian_vector_field, interior_product, FormField, VectorField};
use symflag_core::currents::{stokes_residual, stokes_sweep, MixedForm};
use symflag_core::flagmesh::builders::jitter_top_params;
use symflag_core::flagmesh::{infinitesimal_action, FlagEmbedding, FlagTangent, Mesh};
use symflag_core::linalg::log_log_slope;
use symflag_core::symflag::{
    equivariance_check, extend_normal_flat, flag_omega, hamiltonian_pairing_identity, kks_check, lift_flow_check, lift_tangent, modes_agree, nondegeneracy_probe,
    omega_spec, random_compatible_frame, random_trig_field, random_trig_form, random_trig_function, HamiltonianDictionary, LiftMode,
};
use symflag_core::transgression::{check_contraction_identity, check_d_identity, check_lie_identity, DifferenceScheme, TransgressionSpec};
use symflag_core::{Error, Result};

use crate::fixture::{Fixture, InclusionBlock};
use crate::report::Row;

/// Residuals this small are rounding noise; no convergence order is fitted.
const EXACT_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Calc,
    Stokes,
    Equivariance,
    Kks,
    Nondegeneracy,
    Lifting,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Calc => "calc",
            Suite::Stokes => "stokes",
            Suite::Equivariance => "equivariance",
            Suite::Kks => "kks",
            Suite::Nondegeneracy => "nondegeneracy",
            Suite::Lifting => "lifting",
            Suite::All => "all",
        }
    }

    pub fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Calc, Suite::Stokes, Suite::Equivariance, Suite::Kks, Suite::Nondegeneracy, Suite::Lifting],
            s => vec![s],
        }
    }
}

pub struct Context<'a> {
    pub fixture: &'a Fixture,
    pub flag: &'a FlagEmbedding,
    pub seed: u64,
    /// Debug switch: flips the sign of `Omega` in the KKS rows.
    pub negate_omega: bool,
}

impl Context<'_> {
    /// Independent stream per suite, so suites can run alone or together
    /// with the same draws.
    fn rng(&self, suite: Suite) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(suite as u64 + 1);
        r
    }

    fn dim(&self) -> usize {
        self.flag.ambient().dim()
    }
}

pub fn run(ctx: &Context, suite: Suite) -> Vec<Row> {
    suite
        .expand()
        .into_iter()
        .flat_map(|s| match s {
            Suite::Calc => calc(ctx),
            Suite::Stokes => stokes(ctx),
            Suite::Equivariance => equivariance(ctx),
            Suite::Kks => kks(ctx),
            Suite::Nondegeneracy => nondegeneracy(ctx),
            Suite::Lifting => lifting(ctx),
            Suite::All => unreachable!(),
        })
        .collect()
}

fn le(name: &str, r: Result<f64>, tol: f64) -> Row {
    match r {
        Ok(v) => Row::le(name, v, tol),
        Err(e) => Row::error(name, e),
    }
}

fn generic_spec(ctx: &Context, excess: usize, rng: &mut ChaCha8Rng) -> Result<TransgressionSpec> {
    let forms = ctx.flag.level_dims().iter().map(|d| random_trig_form(ctx.dim(), d + excess, 2, 3, rng)).collect::<Result<Vec<_>>>()?;
    TransgressionSpec::new(ctx.flag, forms, excess)
}

/// Residual at the last step plus the fitted order over all steps.
fn convergence_rows(name: &str, steps: &[f64], tol: f64, slope_tol: f64, residual: impl Fn(f64) -> Result<f64>) -> Vec<Row> {
    let res = match steps.iter().map(|&h| residual(h)).collect::<Result<Vec<f64>>>() {
        Ok(r) => r,
        Err(e) => return vec![Row::error(name, &e), Row::error(format!("{name}.slope"), e)],
    };
    let detail = format!("steps {steps:?}, residuals {res:?}");
    let last = *res.last().unwrap_or(&f64::NAN);
    let slope_row = if res.iter().all(|&r| r <= EXACT_FLOOR) {
        Row::skipped(format!("{name}.slope"), format!("identity exact to rounding at every step: {res:?}"))
    } else {
        Row::ge(format!("{name}.slope"), log_log_slope(steps, &res), slope_tol).with_detail(detail.clone())
    };
    vec![Row::le(name, last, tol).with_detail(detail), slope_row]
}

fn calc(ctx: &Context) -> Vec<Row> {
    let cfg = &ctx.fixture.config;
    let tol = &cfg.tolerances;
    let steps = &cfg.steps.identity;
    let mut rng = ctx.rng(Suite::Calc);
    let dim = ctx.dim();
    let flag = ctx.flag;
    let mut rows = Vec::new();

    let x = random_trig_field(dim, 2, 3, &mut rng);
    let t = infinitesimal_action(flag, &random_trig_field(dim, 2, 3, &mut rng));
    rows.push(le(
        "calc.contraction.omega",
        omega_spec(flag).and_then(|spec| check_contraction_identity(&spec, flag, &x, &[&t])).map(|c| c.residual),
        tol.contraction,
    ));
    let spec1 = generic_spec(ctx, 1, &mut rng);
    let x1 = random_trig_field(dim, 2, 3, &mut rng);
    rows.push(le(
        "calc.contraction.generic",
        spec1.and_then(|spec| check_contraction_identity(&spec, flag, &x1, &[])).map(|c| c.residual),
        tol.contraction,
    ));

    for excess in [0usize, 1] {
        let spec = generic_spec(ctx, excess, &mut rng);
        let (x, y) = (random_trig_field(dim, 2, 3, &mut rng), random_trig_field(dim, 2, 3, &mut rng));
        let name = format!("calc.d_identity.l{excess}");
        match &spec {
            Ok(spec) => rows.extend(convergence_rows(&name, steps, tol.identity, tol.identity_slope, |h| {
                check_d_identity(spec, flag, &x, Some(&y), h, DifferenceScheme::Central).map(|c| c.residual)
            })),
            Err(e) => rows.push(Row::error(name, e)),
        }
    }

    for excess in [0usize, 1] {
        let spec = generic_spec(ctx, excess, &mut rng);
        let x = random_trig_field(dim, 2, 3, &mut rng);
        let t = infinitesimal_action(flag, &random_trig_field(dim, 2, 3, &mut rng));
        let args: Vec<&FlagTangent> = if excess == 1 { vec![&t] } else { vec![] };
        let name = format!("calc.lie_identity.l{excess}");
        match &spec {
            Ok(spec) => rows.extend(convergence_rows(&name, steps, tol.identity, tol.identity_slope, |h| {
                check_lie_identity(spec, flag, &x, &args, h, DifferenceScheme::Central).map(|c| c.residual)
            })),
            Err(e) => rows.push(Row::error(name, e)),
        }
    }
    rows
}

/// A random mixed form with one component of degree `d - 1` per level dimension `d > 0`.
fn random_beta(ctx: &Context, rng: &mut ChaCha8Rng) -> Result<Option<MixedForm>> {
    let mut dims: Vec<usize> = ctx.flag.level_dims().into_iter().filter(|&d| d > 0).collect();
    dims.dedup();
    if dims.is_empty() {
        return Ok(None);
    }
    let comps = dims.iter().map(|d| random_trig_form(ctx.dim(), d - 1, 2, 3, rng)).collect::<Result<Vec<_>>>()?;
    Ok(Some(MixedForm::new(ctx.dim(), comps)?))
}

/// The fixture re-meshed at `n x n` with jittered interior vertices, when the
/// top level is a charted grid and inclusions are given by parameters.
fn sweep_builder<'a>(ctx: &'a Context<'a>) -> std::result::Result<impl Fn(usize) -> Result<FlagEmbedding> + 'a, String> {
    let fx = ctx.fixture;
    let top = fx.levels.last().ok_or("no levels")?;
    let grid = top.grid.as_ref().ok_or("top level is not a grid")?;
    if fx.chart.is_none() {
        return Err("fixture has no chart".into());
    }
    if fx.inclusions.iter().any(|i| matches!(i, InclusionBlock::VertexMap(_))) {
        return Err("inclusions are given by vertex index, not by parameters".into());
    }
    let periods = grid.periods;
    let sweep = &fx.config.sweep;
    Ok(move |n: usize| {
        let mut f = fx.clone();
        f.levels.last_mut().unwrap().grid.as_mut().unwrap().n = [n, n];
        f.config.quadrature.triangle_degree = sweep.triangle_degree;
        let flag = f.flag().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let amount = [sweep.jitter * periods[0] / n as f64, sweep.jitter * periods[1] / n as f64];
        jitter_top_params(&flag, &amount, ctx.seed.wrapping_add(n as u64))
    })
}

fn stokes(ctx: &Context) -> Vec<Row> {
    let tol = &ctx.fixture.config.tolerances;
    let mut rng = ctx.rng(Suite::Stokes);
    let beta = match random_beta(ctx, &mut rng) {
        Ok(Some(b)) => b,
        Ok(None) => return vec![Row::skipped("stokes.residual", "flag has only 0-dimensional levels")],
        Err(e) => return vec![Row::error("stokes.residual", e)],
    };
    let mut rows = vec![le("stokes.residual", stokes_residual(ctx.flag, &beta), tol.stokes_residual)];
    match sweep_builder(ctx) {
        Err(why) => rows.push(Row::skipped("stokes.sweep.slope", why)),
        Ok(build) => {
            let res = &ctx.fixture.config.sweep.resolutions;
            rows.push(match stokes_sweep(res, build, &beta) {
                Ok(s) => Row::ge("stokes.sweep.slope", s.slope, tol.stokes_slope)
                    .with_detail(format!("resolutions {:?}, residuals {:?}", s.resolutions, s.residuals)),
                Err(e) => Row::error("stokes.sweep.slope", e),
            });
        }
    }
    rows
}

/// A single point of the fixture's ambient space, away from the origin.
fn point_flag(ctx: &Context) -> Result<FlagEmbedding> {
    let p: Vec<f64> = (0..ctx.dim()).map(|j| 0.3 + 0.41 * j as f64).collect();
    Ok(FlagEmbedding::new(ctx.flag.ambient().clone(), vec![Mesh::points(1)], vec![], vec![p])?.with_symplectic(true))
}

fn max_over<F: FnMut() -> Result<f64>>(n: usize, mut f: F) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..n {
        worst = worst.max(f()?);
    }
    Ok(worst)
}

fn equivariance(ctx: &Context) -> Vec<Row> {
    let cfg = &ctx.fixture.config;
    let mut rng = ctx.rng(Suite::Equivariance);
    let dim = ctx.dim();
    let n = cfg.random_pairs;
    let dt = cfg.steps.equivariance_dt;
    let random = max_over(n, || {
        let (f, g) = (random_trig_function(dim, 2, 3, &mut rng), random_trig_function(dim, 2, 3, &mut rng));
        equivariance_check(ctx.flag, &f, &g, dt, DifferenceScheme::Central).map(|c| c.residual)
    });
    let f = random_trig_function(dim, 2, 3, &mut rng);
    let x = random_trig_field(dim, 2, 3, &mut rng);
    let pairing = hamiltonian_pairing_identity(ctx.flag, &f, &x, dt, DifferenceScheme::Central).map(|c| c.residual);
    let (f, g) = (random_trig_function(dim, 2, 3, &mut rng), random_trig_function(dim, 2, 3, &mut rng));
    let point = point_flag(ctx).and_then(|p| equivariance_check(&p, &f, &g, cfg.steps.point_dt, DifferenceScheme::Central)).map(|c| c.residual);
    vec![
        le("equivariance.random_pairs", random, cfg.tolerances.equivariance).with_detail(format!("max over {n} pairs, dt {dt}")),
        le("equivariance.hamiltonian_pairing", pairing, cfg.tolerances.equivariance),
        le("equivariance.point", point, cfg.tolerances.point_equivariance).with_detail(format!("dt {}", cfg.steps.point_dt)),
    ]
}

fn kks(ctx: &Context) -> Vec<Row> {
    let cfg = &ctx.fixture.config;
    let mut rng = ctx.rng(Suite::Kks);
    let dim = ctx.dim();
    let sign = if ctx.negate_omega { -1.0 } else { 1.0 };
    let n = cfg.random_pairs;
    let random = max_over(n, || {
        let (f, g) = (random_trig_function(dim, 2, 3, &mut rng), random_trig_function(dim, 2, 3, &mut rng));
        kks_check(ctx.flag, &f, &g).map(|c| (sign * c.lhs - c.rhs).abs())
    });
    let (f, g) = (random_trig_function(dim, 2, 3, &mut rng), random_trig_function(dim, 2, 3, &mut rng));
    let point = point_flag(ctx).and_then(|p| kks_check(&p, &f, &g)).map(|c| (sign * c.lhs - c.rhs).abs());
    let mut rows = vec![
        le("kks.random_pairs", random, cfg.tolerances.kks).with_detail(format!("max over {n} pairs")),
        le("kks.point", point, cfg.tolerances.kks),
    ];
    if ctx.negate_omega {
        for r in &mut rows {
            r.detail = Some(match &r.detail { Some(d) => format!("{d} (Omega negated)"), None => "Omega negated".into() });
        }
    }
    rows
}

/// `sum_i int_{N_i} i_V i_U alpha_i` for constant `U, V`, integrated
/// directly rather than through the transgression sampler.
fn contracted_pairing(flag: &FlagEmbedding, u: &[f64], v: &[f64]) -> Result<f64> {
    let amb = flag.ambient();
    let mut dims = flag.level_dims();
    dims.sort_unstable();
    dims.dedup();
    let (fu, fv) = (VectorField::constant(u.to_vec()), VectorField::constant(v.to_vec()));
    let comps = dims
        .iter()
        .map(|&d| {
            let k = d / 2 + 1;
            let alpha = amb.omega_power(k).scale(1.0 / k as f64);
            interior_product(&interior_product(&alpha, &fu)?, &fv)
        })
        .collect::<Result<Vec<FormField>>>()?;
    symflag_core::currents::pair(flag, &MixedForm::new(amb.dim(), comps)?)
}

fn nondegeneracy(ctx: &Context) -> Vec<Row> {
    let cfg = &ctx.fixture.config;
    let tol = &cfg.tolerances;
    let m = cfg.frame_size;
    let frame = random_compatible_frame(ctx.flag, m, ctx.seed.wrapping_add(Suite::Nondegeneracy as u64));
    let refs: Vec<&FlagTangent> = frame.iter().collect();
    let mut rows = match nondegeneracy_probe(ctx.flag, &refs) {
        Ok(r) => vec![
            Row::ge("nondegeneracy.rank", r.rank as f64, m as f64).with_detail(format!("{m}-member frame")),
            Row::ge("nondegeneracy.min_singular_value", r.min_singular_value, tol.min_singular_value),
        ],
        Err(e) => vec![Row::error("nondegeneracy.rank", e)],
    };
    let dim = ctx.dim();
    let (a, b) = (1.5, -0.7);
    let mut u = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    u[dim - 2] = a;
    v[dim - 1] = b;
    let zu = infinitesimal_action(ctx.flag, &VectorField::constant(u.clone()));
    let zv = infinitesimal_action(ctx.flag, &VectorField::constant(v.clone()));
    rows.push(match (flag_omega(ctx.flag, &zu, &zv), contracted_pairing(ctx.flag, &u, &v)) {
        (Ok(x), Ok(y)) => Row::le("nondegeneracy.analytic_pair", (x - y).abs(), tol.analytic_pair).with_detail(format!("Omega = {x}, direct = {y}, a = {a}, b = {b}")),
        (Err(e), _) | (_, Err(e)) => Row::error("nondegeneracy.analytic_pair", e),
    });
    rows
}

fn lifting(ctx: &Context) -> Vec<Row> {
    let cfg = &ctx.fixture.config;
    let tol = &cfg.tolerances;
    let flag = ctx.flag;
    let mut rng = ctx.rng(Suite::Lifting);
    let mut rows = Vec::new();
    let dict = match HamiltonianDictionary::trig(flag.ambient(), cfg.solver.cap) {
        Ok(d) => d,
        Err(e) => return vec![Row::error("lifting.dictionary", e)],
    };

    let k = rand::Rng::random_range(&mut rng, 0..dict.len());
    let rep = hamiltonian_vector_field(flag.ambient(), &FormField::scalar(dict.basis()[k].clone()))
        .map(|x| infinitesimal_action(flag, &x).without_generator())
        .and_then(|xi| lift_tangent(flag, &xi, &dict, LiftMode::Direct, cfg.solver.cap, cfg.solver.damping))
        .map(|(_, r)| r.residual);
    rows.push(le("lifting.representable", rep, tol.lift_representable).with_detail(format!("X of {}", dict.labels()[k])));

    match &ctx.fixture.lift {
        None => rows.push(Row::skipped("lifting.mixed", "fixture has no lift tangent")),
        Some(block) => match ctx.fixture.tangent(flag, &block.tangent) {
            Err(e) => rows.push(Row::error("lifting.mixed", e)),
            Ok(xi) => {
                let mut residuals = Vec::new();
                for mode in [LiftMode::Direct, LiftMode::Inductive] {
                    let name = format!("lifting.mixed.{}", if mode == LiftMode::Direct { "direct" } else { "inductive" });
                    match lift_tangent(flag, &xi, &dict, mode, cfg.solver.cap, cfg.solver.damping) {
                        Err(e) => rows.push(Row::error(name, e)),
                        Ok((h, r)) => {
                            rows.push(Row::le(&name, r.residual, tol.lift_mixed).with_detail(format!("per-level max {:?}", r.level_max)));
                            let dt = cfg.steps.lift_flow_dt;
                            rows.push(match lift_flow_check(flag, &xi, &h, dt) {
                                Ok(fc) => Row::le(format!("{name}.flow"), fc.deviation, r.residual + 10.0 * dt),
                                Err(e) => Row::error(format!("{name}.flow"), e),
                            });
                            residuals.push(r.residual);
                        }
                    }
                }
                if let [d, i] = residuals[..] {
                    let agree = modes_agree(d, i);
                    let mut row = Row::le("lifting.modes_agree", if agree { 0.0 } else { 1.0 }, 0.0);
                    row.detail = Some(format!("direct {d:e}, inductive {i:e}"));
                    rows.push(row);
                }
            }
        },
    }

    let top = flag.top();
    let d = flag.level(top).intrinsic_dim();
    if flag.realization().is_none() || d >= ctx.dim() {
        rows.push(Row::skipped("lifting.extension_normal", "top level has no chart or no normal directions"));
    } else {
        let f = random_trig_function(d, 2, 3, &mut rng);
        let defect = extend_normal_flat(&f, flag, top, None).and_then(|ext| ext.normal_derivative_defect());
        rows.push(le("lifting.extension_normal", defect, tol.extension_normal));
    }
    rows
}
