//! Hamiltonian lifting of flag tangents: find `h` with `X_h|_{N_i} = xi_i mod TN_i`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ambient::{flow_signed, hamiltonian_vector_field, trig_dictionary, AmbientSpace, FormField, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::flagmesh::{tangent_bases, FlagEmbedding, FlagTangent, Realization};
use crate::linalg;
use crate::par;

/// Tikhonov damping relative to the largest diagonal entry of the normal equations.
pub const DEFAULT_DAMPING: f64 = 1e-10;
const RANK_CUT: f64 = 1e-10;
/// Refinement sweeps of iterated Tikhonov; the damping bias in a direction with
/// eigenvalue `l` shrinks to `(d / (l + d))^REFINEMENTS`.
const REFINEMENTS: i32 = 4;
/// Residuals below this count as exact when comparing lifting modes.
pub const MODE_AGREEMENT_FLOOR: f64 = 1e-10;

/// Achieved residuals of the two lifting modes agree within a factor of 2
/// (or both are below [`MODE_AGREEMENT_FLOOR`]).
pub fn modes_agree(a: f64, b: f64) -> bool {
    let (lo, hi) = (a.min(b), a.max(b));
    hi <= MODE_AGREEMENT_FLOOR || hi <= 2.0 * lo
}

#[derive(Clone, Debug)]
pub struct HamiltonianDictionary {
    basis: Vec<ScalarField>,
    fields: Vec<VectorField>,
    labels: Vec<String>,
}

impl HamiltonianDictionary {
    /// Nonconstant trig monomials with `|m|_1 <= cap` (constants have no Hamiltonian field).
    pub fn trig(ambient: &AmbientSpace, cap: u32) -> Result<Self> {
        Self::from_functions(ambient, trig_dictionary(ambient.dim(), cap).into_iter().skip(1).collect())
    }

    pub fn from_functions(ambient: &AmbientSpace, basis: Vec<ScalarField>) -> Result<Self> {
        let names = ambient.coordinate_names();
        let fields = basis
            .iter()
            .map(|f| {
                if f.nvars() != ambient.dim() {
                    return Err(Error::DimensionMismatch { expected: ambient.dim(), got: f.nvars() });
                }
                hamiltonian_vector_field(ambient, &FormField::scalar(f.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HamiltonianDictionary { labels: basis.iter().map(|f| f.label(&names)).collect(), basis, fields })
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[ScalarField] {
        &self.basis
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn combine(&self, coeffs: &[f64]) -> ScalarField {
        ScalarField::sum(self.basis[0].nvars(), &coeffs.iter().copied().zip(self.basis.iter()).collect::<Vec<_>>())
    }

    /// Numerical rank of the sample matrix `[h_k(x_j)]`.
    pub fn sample_rank(&self, points: &[Vec<f64>]) -> usize {
        let a = DMatrix::from_fn(points.len(), self.len(), |j, k| self.basis[k].eval(&points[j]));
        let sv = a.singular_values();
        let top = sv.iter().copied().fold(0.0, f64::max);
        sv.iter().filter(|&&s| s > 1e-10 * top).count()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiftMode {
    #[default]
    Direct,
    Inductive,
}

fn chi(t: f64) -> (f64, f64) {
    if t <= 1.0 {
        (1.0, 0.0)
    } else if t >= 2.0 {
        (0.0, 0.0)
    } else {
        let s = t - 1.0;
        (1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s), -30.0 * s * s * (1.0 - s) * (1.0 - s))
    }
}

/// Distance at which the level's tubes around it meet themselves through the
/// torus wrap: the smallest ambient period (unbounded on `R^2n`).
pub fn level_separation(flag: &FlagEmbedding, _level: usize) -> f64 {
    if flag.ambient().is_torus() {
        flag.ambient().min_period()
    } else {
        f64::INFINITY
    }
}

/// A function on a charted level extended to the ambient space: constant along
/// the symplectic complements of the tangent planes within radius `rho`,
/// smoothly cut off to zero by `2 rho`.
#[derive(Clone)]
pub struct NormalExtension {
    ambient: AmbientSpace,
    realization: Realization,
    f: ScalarField,
    rho: f64,
    params: Vec<Vec<f64>>,
    positions: Vec<Vec<f64>>,
    reach: f64,
}

impl std::fmt::Debug for NormalExtension {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("NormalExtension").field("f", &self.f).field("rho", &self.rho).finish()
    }
}

struct Foot {
    s: Vec<f64>,
    normal: Vec<f64>,
    tangents: Vec<Vec<f64>>,
}

/// Extends `f`, a function of the chart parameters of level `level`, off the level.
/// `rho` defaults to a quarter of [`level_separation`].
pub fn extend_normal_flat(f: &ScalarField, flag: &FlagEmbedding, level: usize, rho: Option<f64>) -> Result<NormalExtension> {
    flag.check_level(level)?;
    let real = flag
        .realization()
        .filter(|_| level == flag.top())
        .ok_or_else(|| Error::Unsupported("normal extension needs a level carrying an analytic chart".into()))?;
    let d = flag.level(level).intrinsic_dim();
    let n = flag.ambient().dim();
    if d >= n {
        return Err(Error::InvalidArgument(format!("level {level} has codimension 0")));
    }
    if f.nvars() != d {
        return Err(Error::DimensionMismatch { expected: d, got: f.nvars() });
    }
    let sep = level_separation(flag, level);
    let rho = rho.unwrap_or(0.25 * sep);
    if !(rho > 0.0) || rho > 0.5 * sep {
        return Err(Error::TubularRadius { radius: rho, separation: sep });
    }
    let nv = flag.level(level).n_vertices();
    let params: Vec<Vec<f64>> = (0..nv).map(|v| flag.vertex_param(level, v).unwrap().to_vec()).collect();
    let positions = flag.level_positions(level);
    let max_edge = crate::flagmesh::local_edge_lengths(flag, level).into_iter().fold(0.0, f64::max);
    Ok(NormalExtension {
        ambient: flag.ambient().clone(),
        realization: real.clone(),
        f: f.clone(),
        rho,
        params,
        positions,
        reach: 2.5 * rho + 2.0 * max_edge,
    })
}

impl NormalExtension {
    pub fn radius(&self) -> f64 {
        self.rho
    }

    pub fn level_function(&self) -> &ScalarField {
        &self.f
    }

    fn frame(&self, s: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let d = s.len();
        let units: Vec<Vec<f64>> = (0..d).map(|a| (0..d).map(|b| if a == b { 1.0 } else { 0.0 }).collect()).collect();
        self.realization.eval_with_tangents(s, &units)
    }

    /// `G^{-1} omega(e_b, x - phi(s))`: zero exactly when `x - phi(s)` is symplectic-orthogonal to the level.
    fn defect(&self, s: &[f64], x: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
        let (p, e) = self.frame(s)?;
        let disp = self.ambient.displacement(&p, x);
        let d = e.len();
        let g = DMatrix::from_fn(d, d, |a, b| self.ambient.omega(&e[a], &e[b]));
        let rhs = DVector::from_fn(d, |b, _| self.ambient.omega(&e[b], &disp));
        let c = g.lu().solve(&rhs).ok_or_else(|| Error::NotSymplectic("omega degenerates on the level".into()))?;
        Ok((c.iter().copied().collect(), disp, e))
    }

    fn foot(&self, x: &[f64]) -> Result<Option<Foot>> {
        let (best, dist) = self
            .positions
            .iter()
            .enumerate()
            .map(|(v, p)| (v, self.ambient.distance(p, x)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if dist > self.reach {
            return Ok(None);
        }
        let mut s = self.params[best].clone();
        let d = s.len();
        for _ in 0..60 {
            let (c, _, _) = self.defect(&s, x)?;
            let jac = self.defect_jacobian(&s, x)?;
            let step = jac.lu().solve(&DVector::from_vec(c)).ok_or_else(|| Error::NotSymplectic("singular projection".into()))?;
            for a in 0..d {
                s[a] -= step[a];
            }
            if step.norm() < 1e-14 {
                break;
            }
        }
        let (_, normal, tangents) = self.defect(&s, x)?;
        Ok(Some(Foot { s, normal, tangents }))
    }

    fn defect_jacobian(&self, s: &[f64], x: &[f64]) -> Result<DMatrix<f64>> {
        let d = s.len();
        let h = 1e-6;
        let mut jac = DMatrix::zeros(d, d);
        for a in 0..d {
            let (mut sp, mut sm) = (s.to_vec(), s.to_vec());
            sp[a] += h;
            sm[a] -= h;
            let (cp, _, _) = self.defect(&sp, x)?;
            let (cm, _, _) = self.defect(&sm, x)?;
            for b in 0..d {
                jac[(b, a)] = (cp[b] - cm[b]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(match self.foot(x)? {
            None => 0.0,
            Some(ft) => self.f.eval(&ft.s) * chi(linalg::norm(&ft.normal) / self.rho).0,
        })
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.ambient.dim();
        let Some(ft) = self.foot(x)? else { return Ok(vec![0.0; n]) };
        let d = ft.s.len();
        let r = linalg::norm(&ft.normal);
        let (w, dw) = chi(r / self.rho);
        if w == 0.0 && dw == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let e = &ft.tangents;
        let g = DMatrix::from_fn(d, d, |a, b| self.ambient.omega(&e[a], &e[b]));
        // d c / d x = G^{-1} [omega(e_b, .)], d s / d x = -(d c / d s)^{-1} d c / d x
        let omega_rows = DMatrix::from_fn(d, n, |b, j| {
            let mut u = vec![0.0; n];
            u[j] = 1.0;
            self.ambient.omega(&e[b], &u)
        });
        let dcdx = g.lu().solve(&omega_rows).ok_or_else(|| Error::NotSymplectic("omega degenerates on the level".into()))?;
        let dcds = self.defect_jacobian(&ft.s, x)?;
        let dsdx = -dcds.lu().solve(&dcdx).ok_or_else(|| Error::NotSymplectic("singular projection".into()))?;
        let mut fgrad = vec![0.0; d];
        let fv = self.f.eval_grad(&ft.s, &mut fgrad);
        let mut grad: Vec<f64> = (0..n).map(|j| w * (0..d).map(|a| fgrad[a] * dsdx[(a, j)]).sum::<f64>()).collect();
        if dw != 0.0 && r > 0.0 {
            // d|n|/dx = n^T (I - dphi ds/dx) / |n|
            for j in 0..n {
                let mut dn = ft.normal[j];
                for (i, nv) in ft.normal.iter().enumerate() {
                    dn -= nv * (0..d).map(|a| e[a][i] * dsdx[(a, j)]).sum::<f64>();
                }
                grad[j] += fv * dw / self.rho * dn / r;
            }
        }
        Ok(grad)
    }

    /// Largest `|d ext (v)|` over unit vectors `v` symplectic-orthogonal to the
    /// level at its vertices. Zero for an exact normal extension.
    pub fn normal_derivative_defect(&self) -> Result<f64> {
        let n = self.ambient.dim();
        let per = par::try_map_range(self.params.len(), |v| {
            let (_, e) = self.frame(&self.params[v])?;
            let rows: Vec<Vec<f64>> = e
                .iter()
                .map(|t| {
                    (0..n)
                        .map(|j| {
                            let mut u = vec![0.0; n];
                            u[j] = 1.0;
                            self.ambient.omega(t, &u)
                        })
                        .collect()
                })
                .collect();
            let normals = linalg::complement(&linalg::gram_schmidt(&rows, 1e-12), n);
            let g = self.gradient(&self.positions[v])?;
            Ok(normals.iter().map(|w| linalg::dot(&g, w).abs()).fold(0.0, f64::max))
        })?;
        Ok(per.into_iter().fold(0.0, f64::max))
    }

    pub fn form(&self) -> FormField {
        let me = self.clone();
        FormField::opaque(self.ambient.dim(), 0, move |x, _| me.value(x).unwrap_or(f64::NAN))
    }

    pub fn hamiltonian_field(&self) -> VectorField {
        let me = self.clone();
        VectorField::opaque(self.ambient.dim(), move |x| match me.gradient(x) {
            Ok(g) => me.ambient.hamiltonian_vector(&g),
            Err(_) => vec![f64::NAN; me.ambient.dim()],
        })
    }
}

/// `h = symbolic + sum of normal extensions`.
#[derive(Clone, Debug)]
pub struct LiftedHamiltonian {
    pub symbolic: ScalarField,
    pub corrections: Vec<NormalExtension>,
    ambient: AmbientSpace,
}

impl LiftedHamiltonian {
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let mut v = self.symbolic.eval(x);
        for c in &self.corrections {
            v += c.value(x)?;
        }
        Ok(v)
    }

    pub fn vector_field(&self) -> Result<VectorField> {
        let sym = hamiltonian_vector_field(&self.ambient, &FormField::scalar(self.symbolic.clone()))?;
        if self.corrections.is_empty() {
            return Ok(sym);
        }
        let fields: Vec<VectorField> = self.corrections.iter().map(|c| c.hamiltonian_field()).collect();
        let n = self.ambient.dim();
        let all = Arc::new((sym, fields));
        Ok(VectorField::opaque(n, move |x| {
            let mut v = all.0.eval(x);
            for f in &all.1 {
                linalg::axpy(&mut v, 1.0, &f.eval(x));
            }
            v
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    /// `None` for ambient dictionary coefficients, `Some(i)` for the
    /// correction solved on level `i`'s coordinates.
    pub level: Option<usize>,
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub mode: LiftMode,
    pub coefficients: Vec<CoefficientTable>,
    /// Root mean square over vertices of `|P_perp (X_h - xi)|`, per level.
    pub level_rms: Vec<f64>,
    /// Largest `|P_perp (X_h - xi)|` per level.
    pub level_max: Vec<f64>,
    /// Largest entry of `level_max`.
    pub residual: f64,
    /// Rank of each least-squares system against its number of unknowns.
    pub ranks: Vec<(usize, usize)>,
    pub warnings: Vec<String>,
}

/// Stacked rows `P_perp X_k(x_v)` and `P_perp xi(v)` over the chosen vertices.
struct System {
    ata: DMatrix<f64>,
    atb: DVector<f64>,
}

impl System {
    fn new(k: usize) -> Self {
        System { ata: DMatrix::zeros(k, k), atb: DVector::zeros(k) }
    }

    fn add_level<F>(&mut self, flag: &FlagEmbedding, level: usize, bases: &[Vec<Vec<f64>>], target: &[Vec<f64>], columns: F) -> Result<()>
    where
        F: Fn(&[f64]) -> Result<Vec<Vec<f64>>> + Sync + Send,
    {
        let k = self.atb.len();
        let blocks = par::try_map_range(flag.level(level).n_vertices(), |v| {
            let x = flag.vertex_position(level, v);
            let cols: Vec<Vec<f64>> = columns(x)?.iter().map(|c| linalg::reject(c, &bases[v])).collect();
            let b = linalg::reject(&target[v], &bases[v]);
            let mut ata = DMatrix::zeros(k, k);
            let mut atb = DVector::zeros(k);
            for p in 0..k {
                atb[p] = linalg::dot(&cols[p], &b);
                for q in p..k {
                    let v = linalg::dot(&cols[p], &cols[q]);
                    ata[(p, q)] = v;
                    ata[(q, p)] = v;
                }
            }
            Ok::<_, Error>((ata, atb))
        })?;
        for (a, b) in blocks {
            self.ata += a;
            self.atb += b;
        }
        Ok(())
    }

    /// Damped minimum-norm solution (iterated Tikhonov) and numerical rank.
    fn solve(&self, damping: f64) -> (Vec<f64>, usize) {
        let k = self.atb.len();
        if k == 0 {
            return (Vec::new(), 0);
        }
        let scale = (0..k).map(|i| self.ata[(i, i)]).fold(0.0, f64::max);
        if scale == 0.0 {
            return (vec![0.0; k], 0);
        }
        let eig = self.ata.clone().symmetric_eigen();
        let rank = eig.eigenvalues.iter().filter(|&&l| l > RANK_CUT * scale).count();
        let vt_b = eig.eigenvectors.transpose() * &self.atb;
        let delta = damping * scale;
        let y = DVector::from_fn(k, |i, _| {
            let l = eig.eigenvalues[i].max(0.0);
            if l == 0.0 {
                return 0.0;
            }
            (1.0 - (delta / (l + delta)).powi(REFINEMENTS)) * vt_b[i] / l
        });
        ((&eig.eigenvectors * y).iter().copied().collect(), rank)
    }
}

fn target_values(tangent: &FlagTangent, flag: &FlagEmbedding, level: usize) -> Vec<Vec<f64>> {
    tangent.level_values(level).to_vec().into_iter().take(flag.level(level).n_vertices()).collect()
}

/// Finds `h` with `X_h` matching `xi` modulo the level tangent spaces.
/// `cap` sets the frequency cap of the level dictionaries used by the inductive mode.
pub fn lift_tangent(
    flag: &FlagEmbedding,
    xi: &FlagTangent,
    dict: &HamiltonianDictionary,
    mode: LiftMode,
    cap: u32,
    damping: f64,
) -> Result<(LiftedHamiltonian, LiftReport)> {
    if dict.is_empty() {
        return Err(Error::InvalidArgument("empty Hamiltonian dictionary".into()));
    }
    let bases = (0..flag.n_levels()).map(|i| tangent_bases(flag, i)).collect::<Result<Vec<_>>>()?;
    let targets: Vec<Vec<Vec<f64>>> = (0..flag.n_levels()).map(|i| target_values(xi, flag, i)).collect();
    let dict_cols = |x: &[f64]| Ok(dict.fields.iter().map(|f| f.eval(x)).collect::<Vec<_>>());
    let mut warnings = Vec::new();
    let mut ranks = Vec::new();
    let mut tables = Vec::new();
    let top = flag.top();
    let levels: Vec<usize> = match mode {
        LiftMode::Direct => (0..flag.n_levels()).collect(),
        LiftMode::Inductive => vec![top],
    };
    let mut sys = System::new(dict.len());
    for &i in &levels {
        sys.add_level(flag, i, &bases[i], &targets[i], dict_cols)?;
    }
    let (c, rank) = sys.solve(damping);
    ranks.push((rank, dict.len()));
    if rank < dict.len() {
        warnings.push(format!("ambient system has rank {rank} of {}; minimum-norm solution returned", dict.len()));
    }
    tables.push(CoefficientTable { level: None, labels: dict.labels.clone(), values: c.clone() });
    let mut lifted = LiftedHamiltonian { symbolic: dict.combine(&c), corrections: Vec::new(), ambient: flag.ambient().clone() };

    if mode == LiftMode::Inductive {
        for i in (0..top).rev() {
            if i + 1 != top {
                return Err(Error::Unsupported("inductive lifting below the level under the top".into()));
            }
            let d = flag.level(i + 1).intrinsic_dim();
            let level_dict: Vec<ScalarField> = trig_dictionary(d, cap).into_iter().skip(1).collect();
            let exts = level_dict.iter().map(|g| extend_normal_flat(g, flag, i + 1, None)).collect::<Result<Vec<_>>>()?;
            let ext_fields: Vec<VectorField> = exts.iter().map(|e| e.hamiltonian_field()).collect();
            let current = lifted.vector_field()?;
            let residual: Vec<Vec<f64>> = (0..flag.level(i).n_vertices())
                .map(|v| linalg::sub(&targets[i][v], &current.eval(flag.vertex_position(i, v))))
                .collect();
            let mut sys = System::new(level_dict.len());
            sys.add_level(flag, i, &bases[i], &residual, |x| Ok(ext_fields.iter().map(|f| f.eval(x)).collect()))?;
            let (dcoef, rank) = sys.solve(damping);
            ranks.push((rank, level_dict.len()));
            if rank < level_dict.len() {
                warnings.push(format!("level {i} correction has rank {rank} of {}; minimum-norm solution returned", level_dict.len()));
            }
            let names: Vec<String> = (1..=d).map(|a| format!("s{a}")).collect();
            tables.push(CoefficientTable { level: Some(i), labels: level_dict.iter().map(|g| g.label(&names)).collect(), values: dcoef.clone() });
            let f = ScalarField::sum(d, &dcoef.iter().copied().zip(level_dict.iter()).collect::<Vec<_>>());
            if !f.is_zero() {
                lifted.corrections.push(extend_normal_flat(&f, flag, i + 1, None)?);
            }
        }
    }

    let field = lifted.vector_field()?;
    let mut level_rms = Vec::new();
    let mut level_max = Vec::new();
    for i in 0..flag.n_levels() {
        let errs = par::map_range(flag.level(i).n_vertices(), |v| {
            let diff = linalg::sub(&field.eval(flag.vertex_position(i, v)), &targets[i][v]);
            linalg::norm(&linalg::reject(&diff, &bases[i][v]))
        });
        let nv = errs.len().max(1) as f64;
        level_rms.push((errs.iter().map(|e| e * e).sum::<f64>() / nv).sqrt());
        level_max.push(errs.iter().copied().fold(0.0, f64::max));
    }
    let residual = level_max.iter().copied().fold(0.0, f64::max);
    Ok((lifted, LiftReport { mode, coefficients: tables, level_rms, level_max, residual, ranks, warnings }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftFlowReport {
    pub dt: f64,
    /// `max_v |P_perp((Fl_dt(v) - v) / dt - xi(v))|` over all levels.
    pub deviation: f64,
}

/// Flows the vertices by `X_h` for time `dt` and compares the velocity with `xi`.
pub fn lift_flow_check(flag: &FlagEmbedding, xi: &FlagTangent, lifted: &LiftedHamiltonian, dt: f64) -> Result<LiftFlowReport> {
    let field = lifted.vector_field()?;
    let amb = flag.ambient();
    let mut deviation: f64 = 0.0;
    for i in 0..flag.n_levels() {
        let bases = tangent_bases(flag, i)?;
        let pos = flag.level_positions(i);
        let moved = flow_signed(amb, &field, dt, dt.abs().min(1e-2), &pos)?;
        let vals = xi.level_values(i);
        for v in 0..pos.len() {
            let vel = linalg::scale(&amb.displacement(&pos[v], &moved[v]), 1.0 / dt);
            let diff = linalg::sub(&vel, &vals[v]);
            deviation = deviation.max(linalg::norm(&linalg::reject(&diff, &bases[v])));
        }
    }
    Ok(LiftFlowReport { dt, deviation })
}
