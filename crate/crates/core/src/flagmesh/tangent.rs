//! Tangent vectors to flag space: per-level normal fields `xi_i` sampled at
//! level vertices, with `xi_{i+1} - xi_i` tangent to `N_{i+1}` along `N_i`.

use super::flag::FlagEmbedding;
use super::samples::{sample_level, LevelSamples};
use crate::ambient::{AmbientMap, VectorField};
use crate::error::{Error, Result};
use crate::linalg;
use crate::par;

pub const DEFAULT_COMPATIBILITY_TOL: f64 = 1e-8;

/// Full representation `(xi_0, .., xi_{r-1})`. When a generator is present the
/// tangent is `zeta_X` for the flag after `stage` ambient maps (possibly
/// transported since), and quadrature evaluates it exactly instead of
/// interpolating vertex values.
#[derive(Clone, Debug)]
pub struct FlagTangent {
    values: Vec<Vec<Vec<f64>>>,
    generator: Option<(VectorField, usize)>,
}

/// Split representation `(eta_0, .., eta_{r-2}, xi_{r-1})` with `eta_i` in
/// `TN_{i+1}` orthogonal to `TN_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitTangent {
    pub eta: Vec<Vec<Vec<f64>>>,
    pub top: Vec<Vec<f64>>,
}

impl FlagTangent {
    pub fn from_values(flag: &FlagEmbedding, values: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if values.len() != flag.n_levels() {
            return Err(Error::InvalidArgument(format!("{} levels of tangent values for {} levels", values.len(), flag.n_levels())));
        }
        for (i, lv) in values.iter().enumerate() {
            if lv.len() != flag.level(i).n_vertices() {
                return Err(Error::InvalidArgument(format!("level {i}: {} tangent values for {} vertices", lv.len(), flag.level(i).n_vertices())));
            }
            if let Some(v) = lv.iter().find(|v| v.len() != flag.ambient().dim()) {
                return Err(Error::DimensionMismatch { expected: flag.ambient().dim(), got: v.len() });
            }
        }
        Ok(FlagTangent { values, generator: None })
    }

    pub fn zero(flag: &FlagEmbedding) -> Self {
        let n = flag.ambient().dim();
        let values = (0..flag.n_levels()).map(|i| vec![vec![0.0; n]; flag.level(i).n_vertices()]).collect();
        FlagTangent { values, generator: Some((VectorField::zero(n), flag.generation())) }
    }

    pub fn values(&self) -> &[Vec<Vec<f64>>] {
        &self.values
    }

    pub fn level_values(&self, level: usize) -> &[Vec<f64>] {
        &self.values[level]
    }

    pub fn generator(&self) -> Option<&(VectorField, usize)> {
        self.generator.as_ref()
    }

    pub fn without_generator(mut self) -> Self {
        self.generator = None;
        self
    }

    pub fn scale(&self, s: f64) -> FlagTangent {
        FlagTangent {
            values: self.values.iter().map(|lv| lv.iter().map(|v| linalg::scale(v, s)).collect()).collect(),
            generator: self.generator.as_ref().map(|(x, st)| (x.scale(s), *st)),
        }
    }

    /// Sum; the generator survives only when both summands have one at the same stage.
    pub fn add(&self, other: &FlagTangent) -> FlagTangent {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(u, v)| linalg::add(u, v)).collect())
            .collect();
        let generator = match (&self.generator, &other.generator) {
            (Some((x, s)), Some((y, t))) if s == t => Some((x.add(y), *s)),
            _ => None,
        };
        FlagTangent { values, generator }
    }

    /// Adds vectors tangent to each level at its vertices. This changes only
    /// the representative, so a generator is kept.
    pub fn with_tangential_offsets(&self, offsets: &[Vec<Vec<f64>>]) -> FlagTangent {
        let mut out = self.clone();
        for (lv, off) in out.values.iter_mut().zip(offsets) {
            for (v, o) in lv.iter_mut().zip(off) {
                linalg::axpy(v, 1.0, o);
            }
        }
        out
    }

    /// Largest vertex difference to another tangent.
    pub fn max_difference(&self, other: &FlagTangent) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(u, v)| linalg::max_abs(&linalg::sub(u, v))))
            .fold(0.0, f64::max)
    }
}

/// `zeta_X`: `X` sampled at every level's vertices.
pub fn infinitesimal_action(flag: &FlagEmbedding, x: &VectorField) -> FlagTangent {
    let values = (0..flag.n_levels())
        .map(|i| par::map_range(flag.level(i).n_vertices(), |v| x.eval(flag.vertex_position(i, v))))
        .collect();
    FlagTangent { values, generator: Some((x.clone(), flag.generation())) }
}

/// Pushes a tangent at `flag` forward by `DPhi`, giving a tangent at `Phi . flag`.
pub fn push_tangent(flag: &FlagEmbedding, tangent: &FlagTangent, map: &dyn AmbientMap) -> Result<FlagTangent> {
    let values = (0..flag.n_levels())
        .map(|i| {
            par::try_map_range(flag.level(i).n_vertices(), |v| {
                let (_, ys) = map.apply_with_tangents(flag.vertex_position(i, v), &[tangent.values[i][v].clone()])?;
                Ok(ys.into_iter().next().unwrap())
            })
        })
        .collect::<Result<_>>()?;
    Ok(FlagTangent { values, generator: tangent.generator.clone() })
}

/// Orthonormal bases of the discrete tangent spaces of level `i` at its
/// vertices: analytic from the chart when the flag carries one, otherwise the
/// dominant span of incident edge vectors.
pub fn tangent_bases(flag: &FlagEmbedding, level: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    flag.check_level(level)?;
    let mesh = flag.level(level);
    let d = mesh.intrinsic_dim();
    let n = flag.ambient().dim();
    if d == 0 {
        return Ok(vec![Vec::new(); mesh.n_vertices()]);
    }
    let star = mesh.vertex_cells();
    if let Some(real) = flag.realization() {
        let chart = &real.chart;
        return par::try_map_range(mesh.n_vertices(), |v| {
            let s = flag.vertex_param(level, v).unwrap();
            let dirs: Vec<Vec<f64>> = if d == chart.param_dim() {
                (0..d).map(|a| (0..d).map(|b| if a == b { 1.0 } else { 0.0 }).collect()).collect()
            } else {
                // curve inside a surface: average of the unit incident edge directions
                let mut acc = vec![0.0; chart.param_dim()];
                for &c in &star[v] {
                    let e = &mesh.cells()[c];
                    let dp = chart.param_displacement(flag.vertex_param(level, e[0]).unwrap(), flag.vertex_param(level, e[1]).unwrap());
                    let len = linalg::norm(&dp);
                    if len > 0.0 {
                        linalg::axpy(&mut acc, 1.0 / len, &dp);
                    }
                }
                vec![acc]
            };
            let (_, cols) = real.eval_with_tangents(s, &dirs)?;
            Ok(linalg::gram_schmidt(&cols, 1e-12))
        });
    }
    Ok(par::map_range(mesh.n_vertices(), |v| {
        let x = flag.vertex_position(level, v);
        let mut edges = Vec::new();
        for &c in &star[v] {
            for &w in &mesh.cells()[c] {
                if w != v {
                    edges.push(flag.ambient().displacement(x, flag.vertex_position(level, w)));
                }
            }
        }
        linalg::orthonormal_span(&edges, n, d, 1e-10)
    }))
}

/// Mean incident edge length at each vertex of level `i` (1 for points).
pub fn local_edge_lengths(flag: &FlagEmbedding, level: usize) -> Vec<f64> {
    let mesh = flag.level(level);
    if mesh.intrinsic_dim() == 0 {
        return vec![1.0; mesh.n_vertices()];
    }
    let mut sum = vec![0.0; mesh.n_vertices()];
    let mut count = vec![0usize; mesh.n_vertices()];
    for cell in mesh.cells() {
        for a in 0..cell.len() {
            let (v, w) = (cell[a], cell[(a + 1) % cell.len()]);
            let l = flag.ambient().distance(flag.vertex_position(level, v), flag.vertex_position(level, w));
            sum[v] += l;
            sum[w] += l;
            count[v] += 1;
            count[w] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, &c)| if c == 0 { 1.0 } else { s / c as f64 }).collect()
}

/// Largest defect of `xi_{i+1} - xi_i` from `TN_{i+1}` over level-`i`
/// vertices, relative to the local edge length, per inclusion.
pub fn compatibility_defects(flag: &FlagEmbedding, tangent: &FlagTangent) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for i in 0..flag.n_levels().saturating_sub(1) {
        let bases = tangent_bases(flag, i + 1)?;
        let lengths = local_edge_lengths(flag, i + 1);
        let vm = &flag.inclusions()[i].vertex_map;
        let defects = par::map_range(vm.len(), |v| {
            let w = vm[v];
            let diff = linalg::sub(&tangent.values[i + 1][w], &tangent.values[i][v]);
            linalg::norm(&linalg::reject(&diff, &bases[w])) / lengths[w]
        });
        let (vertex, worst) = defects.iter().enumerate().fold((0, 0.0), |acc, (v, &d)| if d > acc.1 { (v, d) } else { acc });
        out.push((vertex, worst));
    }
    Ok(out)
}

/// Errors with the first inclusion whose defect exceeds `tol`.
pub fn check_compatibility(flag: &FlagEmbedding, tangent: &FlagTangent, tol: f64) -> Result<()> {
    for (level, (vertex, defect)) in compatibility_defects(flag, tangent)?.into_iter().enumerate() {
        if defect > tol {
            return Err(Error::Compatibility { level, vertex, defect });
        }
    }
    Ok(())
}

/// Splits into normal components: `xi_{r-1}` projected to `TN_{r-1}^perp` and
/// `eta_i` the part of `xi_i` in `TN_{i+1}` orthogonal to `TN_i`.
pub fn split_riemannian(flag: &FlagEmbedding, tangent: &FlagTangent) -> Result<SplitTangent> {
    check_compatibility(flag, tangent, DEFAULT_COMPATIBILITY_TOL)?;
    let r = flag.n_levels();
    let top_bases = tangent_bases(flag, r - 1)?;
    let top = par::map_range(tangent.values[r - 1].len(), |v| linalg::reject(&tangent.values[r - 1][v], &top_bases[v]));
    let mut eta = Vec::with_capacity(r - 1);
    for i in 0..r - 1 {
        let own = tangent_bases(flag, i)?;
        let upper = tangent_bases(flag, i + 1)?;
        let vm = &flag.inclusions()[i].vertex_map;
        eta.push(par::map_range(vm.len(), |v| {
            // TN_{i+1} part of xi_i, minus its TN_i part
            let in_upper = linalg::project(&tangent.values[i][v], &upper[vm[v]]);
            linalg::reject(&in_upper, &own[v])
        }));
    }
    Ok(SplitTangent { eta, top })
}

/// Inverse of [`split_riemannian`]: `xi_i = xi_{i+1}|_{N_i} + eta_i`.
pub fn join_riemannian(flag: &FlagEmbedding, split: &SplitTangent) -> Result<FlagTangent> {
    let r = flag.n_levels();
    if split.eta.len() + 1 != r {
        return Err(Error::InvalidArgument(format!("{} eta levels for {r} levels", split.eta.len())));
    }
    let mut values = vec![Vec::new(); r];
    values[r - 1] = split.top.clone();
    for i in (0..r - 1).rev() {
        let vm = &flag.inclusions()[i].vertex_map;
        values[i] = (0..vm.len()).map(|v| linalg::add(&values[i + 1][vm[v]], &split.eta[i][v])).collect();
    }
    FlagTangent::from_values(flag, values)
}

/// Representatives normal to each level.
pub fn normal_representative(flag: &FlagEmbedding, tangent: &FlagTangent) -> Result<FlagTangent> {
    let mut values = Vec::with_capacity(flag.n_levels());
    for i in 0..flag.n_levels() {
        let b = tangent_bases(flag, i)?;
        values.push(par::map_range(b.len(), |v| linalg::reject(&tangent.values[i][v], &b[v])));
    }
    Ok(FlagTangent { values, generator: tangent.generator.clone() })
}

/// Samples of level `i` with every tangent evaluated at the sample points
/// (flat `N x n` arrays, one per tangent): generators are used where the
/// geometry allows, vertex values are interpolated otherwise.
pub fn sample_with_tangents(flag: &FlagEmbedding, level: usize, tangents: &[&FlagTangent]) -> Result<(LevelSamples, Vec<Vec<f64>>)> {
    let usable = |t: &FlagTangent| match &t.generator {
        Some((_, st)) => flag.is_curved() || *st == flag.generation(),
        None => false,
    };
    let attach: Vec<(&VectorField, usize)> =
        tangents.iter().filter(|t| usable(t)).map(|t| t.generator.as_ref().map(|(x, s)| (x, *s)).unwrap()).collect();
    let samples = sample_level(flag, level, &attach)?;
    let n = samples.ambient_dim;
    let mesh = flag.level(level);
    let mut slot = 0;
    let mut out = Vec::with_capacity(tangents.len());
    for t in tangents {
        if usable(t) {
            let k = slot;
            slot += 1;
            out.push((0..samples.len()).flat_map(|q| samples.attached(q, k).to_vec()).collect());
        } else {
            let vals = &t.values[level];
            let mut flat = vec![0.0; samples.len() * n];
            for q in 0..samples.len() {
                let cell = &mesh.cells()[samples.cells[q]];
                for (a, &v) in cell.iter().enumerate() {
                    linalg::axpy(&mut flat[q * n..(q + 1) * n], samples.bary[q][a], &vals[v]);
                }
            }
            out.push(flat);
        }
    }
    Ok((samples, out))
}
