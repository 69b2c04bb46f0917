//! Fixture files: a flag, its probes and the checking configuration as JSON.
//!
//! Scalar functions are term tables (`coeff`, `wave`, integer `freq`, optional
//! monomial `powers`), vector fields are one table per ambient coordinate.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use symflag_core::ambient::{hamiltonian_vector_field, AmbientSpace, FormField, ScalarField, Term, Topology, VectorField};
use symflag_core::flagmesh::builders::resolve_params;
use symflag_core::flagmesh::{circle_polygon, infinitesimal_action, torus_grid, Chart, FlagEmbedding, FlagTangent, Mesh, QuadratureConfig, Thresholds};
use symflag_core::symflag::{liouville_orientation, LiftMode, DEFAULT_DAMPING, DEFAULT_SYMPLECTIC_THRESHOLD};

use crate::InputError;

type Result<T> = std::result::Result<T, InputError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub ambient: AmbientBlock,
    pub levels: Vec<LevelBlock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inclusions: Vec<InclusionBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<Vec<f64>>>,
    #[serde(default = "yes")]
    pub symplectic: bool,
    #[serde(default)]
    pub probes: Vec<Probe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lift: Option<LiftBlock>,
    #[serde(default)]
    pub config: Config,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmbientKind {
    Torus,
    Euclidean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbientBlock {
    #[serde(rename = "type")]
    pub kind: AmbientKind,
    pub dim: usize,
    /// Torus periods, `2 pi` each when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<f64>>,
    /// Row-major symplectic matrix, Darboux in `(x1, y1, x2, y2, ..)` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub n: [usize; 2],
    #[serde(default = "tau2")]
    pub periods: [f64; 2],
}

fn tau2() -> [f64; 2] {
    [2.0 * PI; 2]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonBlock {
    pub n: usize,
    #[serde(default = "tau")]
    pub period: f64,
}

fn tau() -> f64 {
    2.0 * PI
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Orientation {
    Named(OrientationRule),
    Signs(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrientationRule {
    Liouville,
}

/// One level mesh: a `grid`, a `polygon`, or explicit `vertices` and `cells`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelBlock {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<PolygonBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Orientation>,
}

/// Inclusion of a level into the next one, by vertex indices or by the
/// parameter labels of the target vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InclusionBlock {
    VertexMap(Vec<usize>),
    Params(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartBlock {
    pub periods: Vec<f64>,
    pub components: Vec<Vec<Term>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub terms: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowBlock {
    pub hamiltonian: Vec<Term>,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default = "milli")]
    pub dt: f64,
    /// Number of trajectory intervals.
    #[serde(default = "ten")]
    pub samples: usize,
}

fn one() -> f64 {
    1.0
}

fn milli() -> f64 {
    1e-3
}

fn ten() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TangentSpec {
    /// `zeta` of the Hamiltonian field of a function.
    Hamiltonian(Vec<Term>),
    /// `zeta` of an ambient vector field.
    Field(Vec<Vec<Term>>),
    /// One entry per level.
    Levels(Vec<LevelTangent>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LevelTangent {
    Field(Vec<Vec<Term>>),
    Values(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftBlock {
    pub tangent: TangentSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Name of the generator behind every seeded choice; only `chacha8`.
    pub rng: String,
    pub quadrature: QuadratureConfig,
    pub thresholds: Thresholds,
    pub symplectic_threshold: f64,
    /// Frequency cap of the probe dictionary.
    pub probe_cap: u32,
    pub random_pairs: usize,
    pub frame_size: usize,
    pub tolerances: Tolerances,
    pub steps: Steps,
    pub sweep: Sweep,
    pub solver: Solver,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 1,
            rng: "chacha8".into(),
            quadrature: QuadratureConfig::default(),
            thresholds: Thresholds::default(),
            symplectic_threshold: DEFAULT_SYMPLECTIC_THRESHOLD,
            probe_cap: 2,
            random_pairs: 10,
            frame_size: 20,
            tolerances: Tolerances::default(),
            steps: Steps::default(),
            sweep: Sweep::default(),
            solver: Solver::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub stokes_residual: f64,
    pub stokes_slope: f64,
    pub contraction: f64,
    pub identity: f64,
    pub identity_slope: f64,
    pub equivariance: f64,
    pub point_equivariance: f64,
    pub kks: f64,
    pub min_singular_value: f64,
    pub analytic_pair: f64,
    pub lift_representable: f64,
    pub lift_mixed: f64,
    pub extension_normal: f64,
    pub flow_conservation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            stokes_residual: 1e-6,
            stokes_slope: 1.7,
            contraction: 1e-10,
            identity: 1e-4,
            identity_slope: 0.7,
            equivariance: 1e-4,
            point_equivariance: 1e-6,
            kks: 1e-6,
            min_singular_value: 1e-8,
            analytic_pair: 1e-8,
            lift_representable: 1e-10,
            lift_mixed: 1e-3,
            extension_normal: 1e-8,
            flow_conservation: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Steps {
    /// Decreasing steps for the flow-derivative identities; the last one is
    /// held to the residual tolerance.
    pub identity: Vec<f64>,
    pub equivariance_dt: f64,
    pub point_dt: f64,
    pub lift_flow_dt: f64,
}

impl Default for Steps {
    fn default() -> Self {
        Steps { identity: vec![4e-3, 2e-3, 1e-3], equivariance_dt: 1e-3, point_dt: 1e-4, lift_flow_dt: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub resolutions: Vec<usize>,
    /// Vertex jitter in grid spacings.
    pub jitter: f64,
    pub triangle_degree: usize,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep { resolutions: vec![32, 64, 128], jitter: 0.25, triangle_degree: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Solver {
    pub cap: u32,
    pub damping: f64,
    pub mode: LiftMode,
}

impl Default for Solver {
    fn default() -> Self {
        Solver { cap: 2, damping: DEFAULT_DAMPING, mode: LiftMode::Direct }
    }
}

impl Fixture {
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(InputError::new("schema error: empty fixture"));
        }
        let fx: Fixture = serde_json::from_str(text).map_err(|e| InputError::new(format!("schema error: {e}")))?;
        if fx.config.rng != "chacha8" {
            return Err(InputError::new(format!("schema error: unknown rng {:?} (expected \"chacha8\")", fx.config.rng)));
        }
        Ok(fx)
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).map_err(|e| InputError::new(format!("cannot read {}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone()).map_err(|_| InputError::new("schema error: fixture is not UTF-8"))?;
        Ok((Self::from_json(&text)?, bytes))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("fixtures serialize");
        s.push('\n');
        s
    }

    pub fn ambient_space(&self) -> Result<AmbientSpace> {
        let a = &self.ambient;
        let topology = match a.kind {
            AmbientKind::Torus => Topology::Torus { periods: a.periods.clone().unwrap_or_else(|| vec![2.0 * PI; a.dim]) },
            AmbientKind::Euclidean => {
                if a.periods.is_some() {
                    return Err(InputError::new("schema error: euclidean ambient takes no periods"));
                }
                Topology::Euclidean
            }
        };
        let omega = match &a.omega {
            None => AmbientSpace::darboux(a.dim),
            Some(rows) => {
                if rows.len() != a.dim || rows.iter().any(|r| r.len() != a.dim) {
                    return Err(InputError::new(format!("schema error: omega must be {0}x{0}", a.dim)));
                }
                rows.concat()
            }
        };
        Ok(AmbientSpace::new(a.dim, topology, omega)?)
    }

    pub fn scalar(&self, terms: &[Term]) -> Result<ScalarField> {
        Ok(ScalarField::from_terms(self.ambient.dim, terms.to_vec())?)
    }

    pub fn vector_field(&self, comps: &[Vec<Term>]) -> Result<VectorField> {
        if comps.len() != self.ambient.dim {
            return Err(InputError::new(format!("schema error: vector field has {} components, ambient dimension is {}", comps.len(), self.ambient.dim)));
        }
        Ok(VectorField::symbolic(comps.iter().map(|c| self.scalar(c)).collect::<Result<Vec<_>>>()?))
    }

    /// Probes with their labels (generated from the terms when absent).
    pub fn probe_fields(&self) -> Result<Vec<(String, ScalarField)>> {
        let names = symflag_core::ambient::coordinate_names(self.ambient.dim);
        self.probes
            .iter()
            .map(|p| {
                let f = self.scalar(&p.terms)?;
                Ok((p.label.clone().unwrap_or_else(|| f.label(&names)), f))
            })
            .collect()
    }

    fn mesh(&self, i: usize) -> Result<Mesh> {
        let l = &self.levels[i];
        let given = [l.grid.is_some(), l.polygon.is_some(), l.vertices.is_some()].iter().filter(|&&b| b).count();
        if given != 1 {
            return Err(InputError::new(format!("schema error: level {i} needs exactly one of grid, polygon, vertices")));
        }
        let mesh = if let Some(g) = &l.grid {
            if l.dim != 2 {
                return Err(InputError::new(format!("schema error: level {i} is a grid but has dimension {}", l.dim)));
            }
            torus_grid(g.n[0], g.n[1], g.periods)?
        } else if let Some(p) = &l.polygon {
            if l.dim != 1 {
                return Err(InputError::new(format!("schema error: level {i} is a polygon but has dimension {}", l.dim)));
            }
            circle_polygon(p.n, p.period)?
        } else {
            let n = l.vertices.unwrap();
            let mut m = if l.dim == 0 && l.cells.is_empty() { Mesh::points(n) } else { Mesh::new(l.dim, n, l.cells.clone())? };
            if let Some(p) = &l.params {
                m = m.with_params(p.clone())?;
            }
            m
        };
        if (l.grid.is_some() || l.polygon.is_some()) && (!l.cells.is_empty() || l.params.is_some()) {
            return Err(InputError::new(format!("schema error: level {i} mixes a generated mesh with explicit cells or params")));
        }
        Ok(match &l.orientation {
            Some(Orientation::Signs(s)) => mesh.with_signs(s.clone())?,
            _ => mesh,
        })
    }

    fn param_periods(&self, i: usize) -> Result<Vec<f64>> {
        let l = &self.levels[i];
        if let Some(g) = &l.grid {
            return Ok(g.periods.to_vec());
        }
        if let Some(p) = &l.polygon {
            return Ok(vec![p.period]);
        }
        match (&self.chart, i + 1 == self.levels.len()) {
            (Some(c), true) => Ok(c.periods.clone()),
            _ => Err(InputError::new(format!("schema error: level {i} has no parameter periods to resolve inclusions against"))),
        }
    }

    /// Builds the flag described by the file.
    pub fn flag(&self) -> Result<FlagEmbedding> {
        let ambient = self.ambient_space()?;
        if self.levels.is_empty() {
            return Err(InputError::new("schema error: no levels"));
        }
        let meshes = (0..self.levels.len()).map(|i| self.mesh(i)).collect::<Result<Vec<_>>>()?;
        if self.inclusions.len() + 1 != meshes.len() {
            return Err(InputError::new(format!("schema error: {} inclusions for {} levels", self.inclusions.len(), meshes.len())));
        }
        for (i, (l, m)) in self.levels.iter().zip(&meshes).enumerate() {
            if l.dim != m.intrinsic_dim() {
                return Err(InputError::new(format!("schema error: level {i} declares dimension {} but its cells have {}", l.dim, m.intrinsic_dim())));
            }
        }
        let maps = self
            .inclusions
            .iter()
            .enumerate()
            .map(|(i, inc)| match inc {
                InclusionBlock::VertexMap(v) => Ok(v.clone()),
                InclusionBlock::Params(p) => Ok(resolve_params(&meshes[i + 1], &self.param_periods(i + 1)?, p)?),
            })
            .collect::<Result<Vec<_>>>()?;
        let flag = match (&self.chart, &self.positions) {
            (Some(c), None) => {
                let comps = c.components.iter().map(|t| ScalarField::from_terms(c.periods.len(), t.clone())).collect::<std::result::Result<Vec<_>, _>>()?;
                FlagEmbedding::from_chart(ambient, meshes, maps, Chart::new(c.periods.clone(), comps)?)?
            }
            (None, Some(p)) => FlagEmbedding::new(ambient, meshes, maps, p.clone())?,
            _ => return Err(InputError::new("schema error: give exactly one of chart and positions")),
        };
        let mut flag = flag.with_symplectic(self.symplectic).with_quadrature(self.config.quadrature)?;
        for (i, l) in self.levels.iter().enumerate() {
            if l.orientation == Some(Orientation::Named(OrientationRule::Liouville)) {
                let signs = liouville_orientation(&flag, i)?;
                let current = flag.level(i).signs().to_vec();
                let combined = signs.iter().zip(&current).map(|(a, b)| a * b).collect();
                flag = flag.with_level_signs(i, combined)?;
            }
        }
        Ok(flag)
    }

    /// Tangent values on every level from a tangent spec.
    pub fn tangent(&self, flag: &FlagEmbedding, spec: &TangentSpec) -> Result<FlagTangent> {
        let amb = flag.ambient();
        match spec {
            TangentSpec::Hamiltonian(terms) => {
                let x = hamiltonian_vector_field(amb, &FormField::scalar(self.scalar(terms)?))?;
                Ok(infinitesimal_action(flag, &x).without_generator())
            }
            TangentSpec::Field(comps) => Ok(infinitesimal_action(flag, &self.vector_field(comps)?).without_generator()),
            TangentSpec::Levels(levels) => {
                if levels.len() != flag.n_levels() {
                    return Err(InputError::new(format!("schema error: tangent has {} levels, flag has {}", levels.len(), flag.n_levels())));
                }
                let values = levels
                    .iter()
                    .enumerate()
                    .map(|(i, lt)| match lt {
                        LevelTangent::Field(comps) => {
                            let x = self.vector_field(comps)?;
                            Ok((0..flag.level(i).n_vertices()).map(|v| x.eval(flag.vertex_position(i, v))).collect())
                        }
                        LevelTangent::Values(v) => Ok(v.clone()),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(FlagTangent::from_values(flag, values)?)
            }
        }
    }

    /// The same fixture with the flag written out explicitly: vertex counts,
    /// cells, parameter labels, orientation signs, inclusion vertex maps and
    /// top positions; no chart.
    pub fn explicit(&self, flag: &FlagEmbedding) -> Fixture {
        let levels = flag
            .levels()
            .iter()
            .map(|m| LevelBlock {
                dim: m.intrinsic_dim(),
                grid: None,
                polygon: None,
                vertices: Some(m.n_vertices()),
                cells: if m.intrinsic_dim() == 0 { Vec::new() } else { m.cells().to_vec() },
                params: m.params().map(|p| p.to_vec()),
                orientation: if m.signs().iter().all(|&s| s == 1.0) { None } else { Some(Orientation::Signs(m.signs().to_vec())) },
            })
            .collect();
        let mut quadrature = self.config.quadrature;
        if quadrature.geometry == symflag_core::flagmesh::Geometry::Curved {
            quadrature.geometry = symflag_core::flagmesh::Geometry::Auto;
        }
        Fixture {
            levels,
            inclusions: flag.inclusions().iter().map(|inc| InclusionBlock::VertexMap(inc.vertex_map.clone())).collect(),
            chart: None,
            positions: Some(flag.positions().to_vec()),
            config: Config { quadrature, ..self.config.clone() },
            ..self.clone()
        }
    }
}
