//! Ambient maps acting on flags.

use std::fmt;
use std::sync::Arc;

use super::field::Dynamics;
use super::flow::flow_with_tangents;
use crate::error::{Error, Result};

const TANGENT_STEP: f64 = 1e-6;

pub trait AmbientMap: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Image of `x`, not wrapped into the torus fundamental domain.
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Image of `x` and pushforwards `DPhi(x) v`. Defaults to central
    /// differences of `apply`.
    fn apply_with_tangents(&self, x: &[f64], vs: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let y = self.apply(x)?;
        let mut out = Vec::with_capacity(vs.len());
        for v in vs {
            let len = crate::linalg::norm(v);
            if len == 0.0 {
                out.push(vec![0.0; v.len()]);
                continue;
            }
            let xp: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + TANGENT_STEP * b / len).collect();
            let xm: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - TANGENT_STEP * b / len).collect();
            let (yp, ym) = (self.apply(&xp)?, self.apply(&xm)?);
            out.push(yp.iter().zip(&ym).map(|(a, b)| len * (a - b) / (2.0 * TANGENT_STEP)).collect());
        }
        Ok((y, out))
    }

    /// `(A, b)` when the map is `x -> A x + b`.
    fn affine(&self) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
        None
    }
}

fn finite(x: Vec<f64>) -> Result<Vec<f64>> {
    if x.iter().all(|c| c.is_finite()) {
        Ok(x)
    } else {
        Err(Error::NonFinite { time: 0.0, point: x })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Translation {
    pub offset: Vec<f64>,
}

impl AmbientMap for Translation {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        finite(crate::linalg::add(x, &self.offset))
    }

    fn apply_with_tangents(&self, x: &[f64], vs: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        Ok((self.apply(x)?, vs.to_vec()))
    }

    fn affine(&self) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
        let n = self.offset.len();
        let id = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Some((id, self.offset.clone()))
    }
}

/// `x -> A x + b`. On a torus `A` should be integral so the map descends.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

impl LinearMap {
    pub fn new(matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> Result<Self> {
        let n = offset.len();
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.len() });
        }
        Ok(LinearMap { matrix, offset })
    }

    fn mul(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.iter().map(|r| crate::linalg::dot(r, v)).collect()
    }

    /// True when `A^T W A = W` for the given row-major `W`.
    pub fn preserves(&self, omega: &[f64]) -> bool {
        let n = self.offset.len();
        (0..n).all(|i| {
            (0..n).all(|j| {
                let mut s = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        s += self.matrix[k][i] * omega[k * n + l] * self.matrix[l][j];
                    }
                }
                (s - omega[i * n + j]).abs() < 1e-12
            })
        })
    }
}

impl AmbientMap for LinearMap {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        finite(crate::linalg::add(&self.mul(x), &self.offset))
    }

    fn apply_with_tangents(&self, x: &[f64], vs: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        Ok((self.apply(x)?, vs.iter().map(|v| self.mul(v)).collect()))
    }

    fn affine(&self) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
        Some((self.matrix.clone(), self.offset.clone()))
    }
}

/// The time-`t` flow of a field, integrated with RK4 at step `dt`; `t` may
/// be negative.
#[derive(Clone)]
pub struct FlowMap {
    field: Arc<dyn Dynamics>,
    t: f64,
    dt: f64,
}

impl fmt::Debug for FlowMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowMap").field("t", &self.t).field("dt", &self.dt).finish_non_exhaustive()
    }
}

impl FlowMap {
    pub fn new<D: Dynamics + 'static>(field: D, t: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid flow time {t} / step {dt}")));
        }
        Ok(FlowMap { field: Arc::new(field), t, dt })
    }

    pub fn time(&self) -> f64 {
        self.t
    }
}

impl AmbientMap for FlowMap {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(flow_with_tangents(self.field.as_ref(), self.t, self.dt, x, &[])?.0)
    }

    fn apply_with_tangents(&self, x: &[f64], vs: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        flow_with_tangents(self.field.as_ref(), self.t, self.dt, x, vs)
    }
}

/// An arbitrary map given by a closure; tangents by central differences.
#[derive(Clone)]
pub struct FnMap {
    dim: usize,
    f: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl fmt::Debug for FnMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnMap").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl FnMap {
    pub fn new<F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static>(dim: usize, f: F) -> Self {
        FnMap { dim, f: Arc::new(f) }
    }
}

impl AmbientMap for FnMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        finite((self.f)(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::{AmbientSpace, VectorField};
    use approx::assert_abs_diff_eq;

    #[test]
    fn shear_is_symplectic() {
        let m = LinearMap::new(
            vec![vec![1.0, 0.0, 0.0, 0.0], vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 2.0, 1.0]],
            vec![0.0; 4],
        )
        .unwrap();
        assert!(m.preserves(&AmbientSpace::darboux(4)));
        let bad = LinearMap::new(
            vec![vec![2.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]],
            vec![0.0; 4],
        )
        .unwrap();
        assert!(!bad.preserves(&AmbientSpace::darboux(4)));
    }

    #[test]
    fn default_tangents_match_exact() {
        let m = LinearMap::new(vec![vec![1.0, 2.0], vec![0.0, 1.0]], vec![0.5, 0.1]).unwrap();
        let g = FnMap::new(2, {
            let m = m.clone();
            move |x: &[f64]| m.apply(x).unwrap()
        });
        let v = vec![vec![0.3, -1.0]];
        let (_, a) = m.apply_with_tangents(&[1.0, 2.0], &v).unwrap();
        let (_, b) = g.apply_with_tangents(&[1.0, 2.0], &v).unwrap();
        for k in 0..2 {
            assert_abs_diff_eq!(a[0][k], b[0][k], epsilon = 1e-8);
        }
    }

    #[test]
    fn backward_flow_inverts_forward() {
        let x = VectorField::symbolic(vec![
            crate::ambient::ScalarField::trig(0.5, crate::ambient::Wave::Sin, vec![0, 1]),
            crate::ambient::ScalarField::trig(0.5, crate::ambient::Wave::Cos, vec![1, 0]),
        ]);
        let f = FlowMap::new(x.clone(), 0.3, 0.01).unwrap();
        let b = FlowMap::new(x, -0.3, 0.01).unwrap();
        let p = [0.2, 0.7];
        let q = b.apply(&f.apply(&p).unwrap()).unwrap();
        assert_abs_diff_eq!(q[0], p[0], epsilon = 1e-10);
        assert_abs_diff_eq!(q[1], p[1], epsilon = 1e-10);
    }
}
