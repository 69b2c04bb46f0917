use std::fmt;
use std::sync::Arc;

use super::mesh::Mesh;
use super::quadrature::{Geometry, QuadratureConfig};
use crate::ambient::{AmbientMap, AmbientSpace, ScalarField};
use crate::error::{Error, Result};
use crate::par;

/// Analytic parametrization of the top level: `s -> (phi_1(s), .., phi_n(s))`
/// on a parameter torus with the given periods.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    param_periods: Vec<f64>,
    components: Vec<ScalarField>,
}

impl Chart {
    pub fn new(param_periods: Vec<f64>, components: Vec<ScalarField>) -> Result<Self> {
        let d = param_periods.len();
        if let Some(c) = components.iter().find(|c| c.nvars() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: c.nvars() });
        }
        if param_periods.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::InvalidMesh("chart parameter periods must be positive".into()));
        }
        Ok(Chart { param_periods, components })
    }

    pub fn param_dim(&self) -> usize {
        self.param_periods.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.components.len()
    }

    pub fn param_periods(&self) -> &[f64] {
        &self.param_periods
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn eval(&self, s: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(s)).collect()
    }

    /// Point and the images `D phi(s) w` of the parameter vectors `ws`.
    pub fn eval_with_tangents(&self, s: &[f64], ws: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.param_dim();
        let mut grad = vec![0.0; d];
        let mut x = Vec::with_capacity(self.components.len());
        let mut out = vec![vec![0.0; self.components.len()]; ws.len()];
        for (i, c) in self.components.iter().enumerate() {
            x.push(c.eval_grad(s, &mut grad));
            for (a, w) in ws.iter().enumerate() {
                out[a][i] = crate::linalg::dot(&grad, w);
            }
        }
        (x, out)
    }

    /// Minimal-image parameter displacement `to - from`.
    pub fn param_displacement(&self, from: &[f64], to: &[f64]) -> Vec<f64> {
        from.iter()
            .zip(to)
            .zip(&self.param_periods)
            .map(|((a, b), p)| {
                let d = b - a;
                d - p * (d / p).round()
            })
            .collect()
    }
}

/// The chart followed by the ambient maps applied to the flag so far.
#[derive(Clone, Debug)]
pub struct Realization {
    pub chart: Chart,
    pub maps: Vec<Arc<dyn AmbientMap>>,
}

impl Realization {
    /// Image of the parameter point together with pushed parameter vectors.
    pub fn eval_with_tangents(&self, s: &[f64], ws: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let (mut x, mut vs) = self.chart.eval_with_tangents(s, ws);
        for m in &self.maps {
            let (y, ys) = if vs.is_empty() { (m.apply(&x)?, Vec::new()) } else { m.apply_with_tangents(&x, &vs)? };
            x = y;
            vs = ys;
        }
        Ok((x, vs))
    }
}

/// `level i -> level i+1` inclusion: vertex map and, per cell of level `i`, a
/// cell of level `i+1` containing it.
#[derive(Clone, Debug, PartialEq)]
pub struct Inclusion {
    pub vertex_map: Vec<usize>,
    pub cell_map: Vec<Option<usize>>,
}

/// A nested flag `N_0 < N_1 < ... < N_{r-1}` in the reduced form: one top
/// mesh with vertex positions, plus lower meshes marked inside it through
/// inclusions. Level indices are 0-based, level `r-1` is the top.
#[derive(Clone)]
pub struct FlagEmbedding {
    ambient: AmbientSpace,
    levels: Vec<Mesh>,
    inclusions: Vec<Inclusion>,
    positions: Vec<Vec<f64>>,
    realization: Option<Realization>,
    symplectic: bool,
    quadrature: QuadratureConfig,
    generation: usize,
    top_index: Vec<Vec<usize>>,
    structural: Vec<String>,
}

impl fmt::Debug for FlagEmbedding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlagEmbedding")
            .field("levels", &self.levels.iter().map(|l| (l.intrinsic_dim(), l.n_vertices())).collect::<Vec<_>>())
            .field("symplectic", &self.symplectic)
            .field("generation", &self.generation)
            .finish_non_exhaustive()
    }
}

impl FlagEmbedding {
    /// `vertex_maps[i]` sends level-`i` vertices to level-`i+1` vertices.
    /// Index-range and shape errors are rejected; non-injective maps and cells
    /// without a supporting cell are kept and reported by validation.
    pub fn new(ambient: AmbientSpace, levels: Vec<Mesh>, vertex_maps: Vec<Vec<usize>>, positions: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidMesh("a flag needs at least one level".into()));
        }
        if vertex_maps.len() + 1 != levels.len() {
            return Err(Error::InvalidMesh(format!("{} inclusions for {} levels", vertex_maps.len(), levels.len())));
        }
        let top = levels.last().unwrap();
        if positions.len() != top.n_vertices() {
            return Err(Error::InvalidMesh(format!("{} positions for {} top vertices", positions.len(), top.n_vertices())));
        }
        if let Some(p) = positions.iter().find(|p| p.len() != ambient.dim()) {
            return Err(Error::DimensionMismatch { expected: ambient.dim(), got: p.len() });
        }
        let mut structural = Vec::new();
        let mut inclusions = Vec::new();
        for (i, vm) in vertex_maps.into_iter().enumerate() {
            let (lo, hi) = (&levels[i], &levels[i + 1]);
            if vm.len() != lo.n_vertices() {
                return Err(Error::InvalidMesh(format!("inclusion {i}: {} images for {} vertices", vm.len(), lo.n_vertices())));
            }
            if let Some(&v) = vm.iter().find(|&&v| v >= hi.n_vertices()) {
                return Err(Error::InvalidMesh(format!("inclusion {i}: image vertex {v} out of range")));
            }
            let mut seen = vec![usize::MAX; hi.n_vertices()];
            for (v, &w) in vm.iter().enumerate() {
                if seen[w] != usize::MAX {
                    structural.push(format!("inclusion {i}: vertices {} and {v} both map to {w} (not injective)", seen[w]));
                } else {
                    seen[w] = v;
                }
            }
            let star = hi.vertex_cells();
            let cell_map: Vec<Option<usize>> = lo
                .cells()
                .iter()
                .map(|cell| {
                    let imgs: Vec<usize> = cell.iter().map(|&v| vm[v]).collect();
                    star[imgs[0]].iter().copied().find(|&c| imgs.iter().all(|w| hi.cells()[c].contains(w)))
                })
                .collect();
            for (c, m) in cell_map.iter().enumerate() {
                if m.is_none() {
                    structural.push(format!("inclusion {i}: cell {c} of level {i} lies in no cell of level {}", i + 1));
                }
            }
            inclusions.push(Inclusion { vertex_map: vm, cell_map });
        }
        for i in 1..levels.len() {
            if levels[i].intrinsic_dim() <= levels[i - 1].intrinsic_dim() {
                structural.push(format!(
                    "level dimensions must increase strictly: level {} has dimension {}, level {i} has {}",
                    i - 1,
                    levels[i - 1].intrinsic_dim(),
                    levels[i].intrinsic_dim()
                ));
            }
        }
        let r = levels.len();
        let mut top_index = vec![Vec::new(); r];
        top_index[r - 1] = (0..levels[r - 1].n_vertices()).collect();
        for i in (0..r - 1).rev() {
            top_index[i] = inclusions[i].vertex_map.iter().map(|&w| top_index[i + 1][w]).collect();
        }
        Ok(FlagEmbedding {
            ambient,
            levels,
            inclusions,
            positions,
            realization: None,
            symplectic: false,
            quadrature: QuadratureConfig::default(),
            generation: 0,
            top_index,
            structural,
        })
    }

    /// Builds the flag with top positions taken from the chart at the top
    /// vertices' parameter labels.
    pub fn from_chart(ambient: AmbientSpace, levels: Vec<Mesh>, vertex_maps: Vec<Vec<usize>>, chart: Chart) -> Result<Self> {
        let top = levels.last().ok_or_else(|| Error::InvalidMesh("a flag needs at least one level".into()))?;
        let params = top.params().ok_or_else(|| Error::InvalidMesh("a chart needs parameter labels on the top mesh".into()))?;
        if chart.ambient_dim() != ambient.dim() {
            return Err(Error::DimensionMismatch { expected: ambient.dim(), got: chart.ambient_dim() });
        }
        if chart.param_dim() != top.intrinsic_dim() {
            return Err(Error::DimensionMismatch { expected: top.intrinsic_dim(), got: chart.param_dim() });
        }
        if let Some(p) = params.iter().find(|p| p.len() != chart.param_dim()) {
            return Err(Error::DimensionMismatch { expected: chart.param_dim(), got: p.len() });
        }
        let positions = params
            .iter()
            .map(|s| {
                let mut x = chart.eval(s);
                ambient.wrap(&mut x);
                x
            })
            .collect();
        let mut flag = Self::new(ambient, levels, vertex_maps, positions)?;
        flag.realization = Some(Realization { chart, maps: Vec::new() });
        Ok(flag)
    }

    pub fn with_symplectic(mut self, on: bool) -> Self {
        self.symplectic = on;
        self
    }

    pub fn with_quadrature(mut self, q: QuadratureConfig) -> Result<Self> {
        q.validate()?;
        if q.geometry == Geometry::Curved && self.realization.is_none() {
            return Err(Error::Unsupported("curved geometry requires an analytic chart".into()));
        }
        self.quadrature = q;
        Ok(self)
    }

    pub fn with_level_signs(mut self, level: usize, signs: Vec<f64>) -> Result<Self> {
        self.check_level(level)?;
        let mesh = self.levels[level].clone().with_signs(signs)?;
        self.levels[level] = mesh;
        Ok(self)
    }

    /// Replaces the top positions, dropping the chart (used for explicit
    /// position overrides).
    pub fn with_positions(mut self, positions: Vec<Vec<f64>>) -> Result<Self> {
        if positions.len() != self.positions.len() {
            return Err(Error::InvalidMesh(format!("{} positions for {} top vertices", positions.len(), self.positions.len())));
        }
        self.positions = positions;
        self.realization = None;
        if self.quadrature.geometry == Geometry::Curved {
            self.quadrature.geometry = Geometry::Auto;
        }
        Ok(self)
    }

    pub(crate) fn check_level(&self, level: usize) -> Result<()> {
        if level >= self.levels.len() {
            Err(Error::InvalidLevel { level, levels: self.levels.len() })
        } else {
            Ok(())
        }
    }

    pub fn ambient(&self) -> &AmbientSpace {
        &self.ambient
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, i: usize) -> &Mesh {
        &self.levels[i]
    }

    pub fn levels(&self) -> &[Mesh] {
        &self.levels
    }

    pub fn level_dims(&self) -> Vec<usize> {
        self.levels.iter().map(Mesh::intrinsic_dim).collect()
    }

    pub fn inclusions(&self) -> &[Inclusion] {
        &self.inclusions
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn realization(&self) -> Option<&Realization> {
        self.realization.as_ref()
    }

    pub fn is_symplectic_mode(&self) -> bool {
        self.symplectic
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        self.quadrature
    }

    /// Number of ambient maps applied since construction.
    pub fn generation(&self) -> usize {
        self.generation
    }

    pub(crate) fn structural_problems(&self) -> &[String] {
        &self.structural
    }

    /// True when quadrature uses the analytic chart.
    pub fn is_curved(&self) -> bool {
        self.realization.is_some() && self.quadrature.geometry != Geometry::Affine
    }

    /// Top-mesh vertex index of each level-`i` vertex.
    pub fn top_index(&self, level: usize) -> &[usize] {
        &self.top_index[level]
    }

    pub fn vertex_position(&self, level: usize, v: usize) -> &[f64] {
        &self.positions[self.top_index[level][v]]
    }

    pub fn vertex_param(&self, level: usize, v: usize) -> Option<&[f64]> {
        let top = self.levels.last().unwrap();
        top.params().map(|p| p[self.top_index[level][v]].as_slice())
    }

    /// Positions of all vertices of level `i`.
    pub fn level_positions(&self, level: usize) -> Vec<Vec<f64>> {
        self.top_index[level].iter().map(|&t| self.positions[t].clone()).collect()
    }

    /// Recomputes top positions from the realization (or keeps them).
    pub(crate) fn rebuild(
        &self,
        levels: Vec<Mesh>,
        vertex_maps: Vec<Vec<usize>>,
        positions: Vec<Vec<f64>>,
    ) -> Result<FlagEmbedding> {
        let mut out = FlagEmbedding::new(self.ambient.clone(), levels, vertex_maps, positions)?;
        out.realization = self.realization.clone();
        out.symplectic = self.symplectic;
        out.quadrature = self.quadrature;
        out.generation = self.generation;
        Ok(out)
    }
}

/// The realized mesh of one level: positions, cells and orientation signs.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedLevel {
    pub intrinsic_dim: usize,
    pub positions: Vec<Vec<f64>>,
    pub cells: Vec<Vec<usize>>,
    pub cell_signs: Vec<f64>,
}

/// Level `i` recovered from the top embedding by composing inclusions.
pub fn realize_level(flag: &FlagEmbedding, level: usize) -> Result<EmbeddedLevel> {
    flag.check_level(level)?;
    let mesh = flag.level(level);
    Ok(EmbeddedLevel {
        intrinsic_dim: mesh.intrinsic_dim(),
        positions: flag.level_positions(level),
        cells: mesh.cells().to_vec(),
        cell_signs: (0..mesh.cells().len()).map(|c| mesh.cell_sign(c)).collect(),
    })
}

/// Pushes the flag forward by an ambient map. Combinatorics, inclusions and
/// orientations are untouched; positions are mapped vertex-wise and wrapped.
pub fn act_map(flag: &FlagEmbedding, map: Arc<dyn AmbientMap>) -> Result<FlagEmbedding> {
    if map.dim() != flag.ambient.dim() {
        return Err(Error::DimensionMismatch { expected: flag.ambient.dim(), got: map.dim() });
    }
    let positions = par::try_map_range(flag.positions.len(), |k| {
        let mut y = map.apply(&flag.positions[k])?;
        if y.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { time: 0.0, point: flag.positions[k].clone() });
        }
        flag.ambient.wrap(&mut y);
        Ok(y)
    })?;
    let mut out = flag.clone();
    out.positions = positions;
    if let Some(r) = &mut out.realization {
        r.maps.push(map);
    }
    out.generation += 1;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::{FlowMap, FormField, Translation, VectorField};
    use crate::flagmesh::builders::canonical_torus_flag;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn top_level_is_unchanged() {
        let flag = canonical_torus_flag(8).unwrap();
        let top = realize_level(&flag, 1).unwrap();
        assert_eq!(top.positions, flag.positions());
        assert_eq!(top.cells, flag.level(1).cells());
    }

    #[test]
    fn marked_points_are_recovered() {
        let flag = canonical_torus_flag(8).unwrap();
        let pts = realize_level(&flag, 0).unwrap();
        assert_eq!(pts.positions.len(), 2);
        assert_eq!(pts.positions[0], vec![0.0, 0.0, 0.0, 0.0]);
        for (a, b) in pts.positions[1].iter().zip([PI, PI, 0.0, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert!(matches!(realize_level(&flag, 2), Err(Error::InvalidLevel { .. })));
    }

    #[test]
    fn nestedness_is_structural() {
        let flag = canonical_torus_flag(8).unwrap();
        let top = flag.level_positions(1);
        for p in flag.level_positions(0) {
            assert!(top.contains(&p));
        }
    }

    #[test]
    fn translations_and_flows_act_on_positions() {
        let flag = canonical_torus_flag(8).unwrap();
        let id = act_map(&flag, Arc::new(Translation { offset: vec![0.0; 4] })).unwrap();
        assert_eq!(id.positions(), flag.positions());
        let t = act_map(&flag, Arc::new(Translation { offset: vec![1.0, 0.0, 0.0, 0.0] })).unwrap();
        let amb = flag.ambient().clone();
        let y1 = FormField::scalar(crate::ambient::ScalarField::coordinate(4, 1));
        let xh = crate::ambient::hamiltonian_vector_field(&amb, &y1).unwrap();
        let f = act_map(&flag, Arc::new(FlowMap::new(xh, 1.0, 1e-2).unwrap())).unwrap();
        for (k, (p, q)) in flag.positions().iter().zip(t.positions()).enumerate() {
            assert_abs_diff_eq!(q[0], (p[0] + 1.0).rem_euclid(2.0 * PI), epsilon = 1e-12);
            assert_eq!(q[1..], p[1..]);
            for c in 0..4 {
                assert_abs_diff_eq!(f.positions()[k][c], q[c], epsilon = 1e-12);
            }
        }
        assert_eq!(t.level(0), flag.level(0));
        assert_eq!(t.inclusions(), flag.inclusions());
    }

    #[test]
    fn act_map_commutes_with_realize_level() {
        let flag = canonical_torus_flag(8).unwrap();
        let m: Arc<dyn AmbientMap> = Arc::new(Translation { offset: vec![0.3, -0.2, 0.1, 0.5] });
        let moved = act_map(&flag, m.clone()).unwrap();
        for level in 0..2 {
            let mut expect = realize_level(&flag, level).unwrap();
            for p in &mut expect.positions {
                *p = m.apply(p).unwrap();
                flag.ambient().wrap(p);
            }
            assert_eq!(realize_level(&moved, level).unwrap(), expect);
        }
    }

    #[test]
    fn non_finite_images_are_errors() {
        let flag = canonical_torus_flag(8).unwrap();
        let bad = crate::ambient::FnMap::new(4, |x: &[f64]| vec![x[0] / 0.0 * 0.0, x[1], x[2], x[3]]);
        assert!(act_map(&flag, Arc::new(bad)).is_err());
        let _ = VectorField::zero(4);
    }
}
