//! Constructors for the standard test flags.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::flag::{Chart, FlagEmbedding};
use super::mesh::{torus_grid, Mesh};
use crate::ambient::{AmbientSpace, ScalarField, Wave};
use crate::error::{Error, Result};

const TAU: f64 = 2.0 * PI;

/// Top-mesh vertices whose parameter labels match `targets` (minimal image
/// on the parameter torus, tolerance `1e-9`).
pub fn resolve_params(top: &Mesh, periods: &[f64], targets: &[Vec<f64>]) -> Result<Vec<usize>> {
    let params = top.params().ok_or_else(|| Error::InvalidMesh("top mesh has no parameter labels".into()))?;
    targets
        .iter()
        .map(|t| {
            params
                .iter()
                .position(|p| {
                    p.len() == t.len()
                        && p.iter().zip(t).zip(periods).all(|((a, b), per)| {
                            let d = b - a;
                            (d - per * (d / per).round()).abs() < 1e-9
                        })
                })
                .ok_or_else(|| Error::InvalidMesh(format!("no top vertex at parameter {t:?}")))
        })
        .collect()
}

/// A surface chart `(u, v) -> (u, v, c_2(u, v), c_3(u, v))` in `T^4`.
fn graph_chart(c2: ScalarField, c3: ScalarField) -> Chart {
    Chart::new(vec![TAU, TAU], vec![ScalarField::coordinate(2, 0), ScalarField::coordinate(2, 1), c2, c3]).expect("valid chart")
}

/// An `n x n` torus grid through `chart` in the standard `T^4`, with a level
/// of marked points at the given parameters below it.
pub fn surface_flag_with_points(n: usize, chart: Chart, marked: &[Vec<f64>]) -> Result<FlagEmbedding> {
    let ambient = AmbientSpace::standard_torus(4)?;
    let top = torus_grid(n, n, [TAU, TAU])?;
    if marked.is_empty() {
        return FlagEmbedding::from_chart(ambient, vec![top], vec![], chart).map(|f| f.with_symplectic(true));
    }
    let vm = resolve_params(&top, chart.param_periods(), marked)?;
    let points = Mesh::points(marked.len());
    Ok(FlagEmbedding::from_chart(ambient, vec![points, top], vec![vm], chart)?.with_symplectic(true))
}

/// The canonical flag: points `(0,0,0,0)` and `(pi,pi,0,0)` inside the
/// coordinate torus `{x2 = y2 = 0}` of `T^4`, meshed `n x n` (`n` even).
pub fn canonical_torus_flag(n: usize) -> Result<FlagEmbedding> {
    if n % 2 != 0 {
        return Err(Error::InvalidMesh(format!("grid size {n} must be even to contain (pi, pi)")));
    }
    surface_flag_with_points(n, graph_chart(ScalarField::zero(2), ScalarField::zero(2)), &[vec![0.0, 0.0], vec![PI, PI]])
}

/// Canonical points on the graph `(u, v, a sin u, a cos v)`; symplectic for `|a| < 1`.
pub fn deformed_torus_flag(n: usize, amplitude: f64) -> Result<FlagEmbedding> {
    let chart = graph_chart(ScalarField::trig(amplitude, Wave::Sin, vec![1, 0]), ScalarField::trig(amplitude, Wave::Cos, vec![0, 1]));
    surface_flag_with_points(n, chart, &[vec![0.0, 0.0], vec![PI, PI]])
}

/// [`deformed_torus_flag`] with every unmarked vertex moved by a seeded
/// uniform offset of up to `jitter` grid spacings in each parameter.
pub fn jittered_torus_flag(n: usize, amplitude: f64, jitter: f64, seed: u64) -> Result<FlagEmbedding> {
    let h = TAU / n as f64;
    jitter_top_params(&deformed_torus_flag(n, amplitude)?, &[jitter * h, jitter * h], seed)
}

/// Moves every top vertex that no lower level uses by a seeded uniform
/// offset of up to `amount[a]` in parameter `a`, keeping the chart.
pub fn jitter_top_params(flag: &FlagEmbedding, amount: &[f64], seed: u64) -> Result<FlagEmbedding> {
    let real = flag.realization().ok_or_else(|| Error::Unsupported("jitter needs a charted flag".into()))?;
    if !real.maps.is_empty() {
        return Err(Error::Unsupported("jitter needs a flag that has not been moved".into()));
    }
    let top = flag.top();
    let params = flag.level(top).params().ok_or_else(|| Error::InvalidMesh("top mesh has no parameter labels".into()))?;
    if amount.len() != flag.level(top).intrinsic_dim() {
        return Err(Error::DimensionMismatch { expected: flag.level(top).intrinsic_dim(), got: amount.len() });
    }
    let mut marked = vec![false; params.len()];
    for i in 0..top {
        for &v in flag.top_index(i) {
            marked[v] = true;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let moved: Vec<Vec<f64>> = params
        .iter()
        .enumerate()
        .map(|(v, p)| {
            let d: Vec<f64> = amount.iter().map(|a| a * rng.random_range(-1.0..=1.0)).collect();
            if marked[v] { p.clone() } else { p.iter().zip(d).map(|(x, e)| x + e).collect() }
        })
        .collect();
    let mut levels = flag.levels().to_vec();
    levels[top] = levels[top].clone().with_params(moved)?;
    let maps = flag.inclusions().iter().map(|inc| inc.vertex_map.clone()).collect();
    FlagEmbedding::from_chart(flag.ambient().clone(), levels, maps, real.chart.clone())?
        .with_symplectic(flag.is_symplectic_mode())
        .with_quadrature(flag.quadrature())
}

/// Canonical points on the surface bumped to `x2 = a sin(2u)`.
pub fn bumped_torus_flag(n: usize, amplitude: f64) -> Result<FlagEmbedding> {
    let chart = graph_chart(ScalarField::trig(amplitude, Wave::Sin, vec![2, 0]), ScalarField::zero(2));
    surface_flag_with_points(n, chart, &[vec![0.0, 0.0], vec![PI, PI]])
}

/// The Lagrangian torus `{y1 = y2 = 0}` parametrized by `(x1, x2)`.
pub fn lagrangian_torus_flag(n: usize) -> Result<FlagEmbedding> {
    let ambient = AmbientSpace::standard_torus(4)?;
    let chart = Chart::new(
        vec![TAU, TAU],
        vec![ScalarField::coordinate(2, 0), ScalarField::zero(2), ScalarField::coordinate(2, 1), ScalarField::zero(2)],
    )?;
    let top = torus_grid(n, n, [TAU, TAU])?;
    Ok(FlagEmbedding::from_chart(ambient, vec![top], vec![], chart)?.with_symplectic(true))
}

/// A single marked point in the standard `T^4`.
pub fn single_point_flag(p: Vec<f64>) -> Result<FlagEmbedding> {
    let ambient = AmbientSpace::standard_torus(4)?;
    Ok(FlagEmbedding::new(ambient, vec![Mesh::points(1)], vec![], vec![p])?.with_symplectic(true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_points_resolve() {
        let f = canonical_torus_flag(64).unwrap();
        assert_eq!(f.n_levels(), 2);
        assert_eq!(f.level(1).n_vertices(), 4096);
        assert_eq!(f.inclusions()[0].vertex_map, vec![0, 32 * 64 + 32]);
        assert!(canonical_torus_flag(7).is_err());
    }
}
