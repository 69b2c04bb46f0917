//! Flat symplectic ambient spaces (R^2n or a flat torus) with constant `omega`,
//! symbolic exterior calculus, Hamiltonian fields and flows.

mod field;
mod flow;
mod form;
mod maps;
mod scalar;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use field::{Dynamics, TimeDependentField, VectorField};
pub use flow::{flow, flow_signed, flow_with_tangents};
pub use form::{exterior_derivative, exterior_derivative_fd, interior_product, lie_derivative, FormField, DEFAULT_FD_STEP};
pub use maps::{AmbientMap, FlowMap, FnMap, LinearMap, Translation};
pub use scalar::{coordinate_names, trig_dictionary, ScalarField, Term, Wave};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Topology {
    Euclidean,
    Torus { periods: Vec<f64> },
}

/// `R^2n` or `T^2n` with a constant symplectic matrix `W`,
/// `omega(u, v) = u^T W v`, and the Euclidean metric.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbientSpace {
    dim: usize,
    topology: Topology,
    omega: Vec<f64>,
    // X_f = ham * grad f
    ham: Vec<f64>,
}

impl AmbientSpace {
    pub fn new(dim: usize, topology: Topology, omega: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::InvalidAmbient(format!("dimension {dim} is not a positive even integer")));
        }
        if omega.len() != dim * dim {
            return Err(Error::InvalidAmbient(format!("omega has {} entries, expected {}", omega.len(), dim * dim)));
        }
        for i in 0..dim {
            for j in 0..dim {
                if (omega[i * dim + j] + omega[j * dim + i]).abs() > 1e-12 {
                    return Err(Error::InvalidAmbient(format!("omega is not antisymmetric at ({i}, {j})")));
                }
            }
        }
        if let Topology::Torus { periods } = &topology {
            if periods.len() != dim {
                return Err(Error::InvalidAmbient(format!("{} periods for dimension {dim}", periods.len())));
            }
            if periods.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
                return Err(Error::InvalidAmbient("torus periods must be strictly positive".into()));
            }
        }
        let w = DMatrix::from_row_slice(dim, dim, &omega);
        let inv = w
            .clone()
            .try_inverse()
            .filter(|_| w.determinant().abs() > 1e-12)
            .ok_or_else(|| Error::InvalidAmbient("omega is degenerate".into()))?;
        let ham = (0..dim * dim).map(|k| -inv[(k / dim, k % dim)]).collect();
        Ok(AmbientSpace { dim, topology, omega, ham })
    }

    /// Standard Darboux matrix in the coordinate order `(x1, y1, x2, y2, ...)`.
    pub fn darboux(dim: usize) -> Vec<f64> {
        let mut w = vec![0.0; dim * dim];
        for k in 0..dim / 2 {
            w[(2 * k) * dim + 2 * k + 1] = 1.0;
            w[(2 * k + 1) * dim + 2 * k] = -1.0;
        }
        w
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(dim, Topology::Euclidean, Self::darboux(dim))
    }

    /// The torus `R^dim / (2 pi Z)^dim` with the Darboux form.
    pub fn standard_torus(dim: usize) -> Result<Self> {
        Self::new(dim, Topology::Torus { periods: vec![2.0 * std::f64::consts::PI; dim] }, Self::darboux(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn periods(&self) -> Option<&[f64]> {
        match &self.topology {
            Topology::Torus { periods } => Some(periods),
            Topology::Euclidean => None,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.topology, Topology::Torus { .. })
    }

    pub fn min_period(&self) -> f64 {
        self.periods().map(|p| p.iter().cloned().fold(f64::INFINITY, f64::min)).unwrap_or(f64::INFINITY)
    }

    pub fn omega_matrix(&self) -> &[f64] {
        &self.omega
    }

    pub fn omega_entry(&self, i: usize, j: usize) -> f64 {
        self.omega[i * self.dim + j]
    }

    pub fn omega(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.dim;
        let mut s = 0.0;
        for i in 0..n {
            if u[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                s += u[i] * self.omega[i * n + j] * v[j];
            }
        }
        s
    }

    /// Row-major matrix `H` with `X_f = H grad f`.
    pub fn hamiltonian_matrix(&self) -> &[f64] {
        &self.ham
    }

    pub fn hamiltonian_vector(&self, grad: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n).map(|i| (0..n).map(|j| self.ham[i * n + j] * grad[j]).sum()).collect()
    }

    /// Wraps a point into `[0, period)` on the torus; no-op on `R^2n`.
    pub fn wrap(&self, x: &mut [f64]) {
        if let Topology::Torus { periods } = &self.topology {
            for (xi, p) in x.iter_mut().zip(periods) {
                *xi = xi.rem_euclid(*p);
                if *xi >= *p {
                    *xi = 0.0;
                }
            }
        }
    }

    /// Shortest displacement `to - from` (minimal image on the torus).
    pub fn displacement(&self, from: &[f64], to: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = to.iter().zip(from).map(|(a, b)| a - b).collect();
        if let Topology::Torus { periods } = &self.topology {
            for (di, p) in d.iter_mut().zip(periods) {
                *di -= p * (*di / p).round();
            }
        }
        d
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        crate::linalg::norm(&self.displacement(a, b))
    }

    /// `omega` as a constant 2-form.
    pub fn omega_form(&self) -> FormField {
        let n = self.dim;
        let mut comps = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let w = self.omega[i * n + j];
                if w != 0.0 {
                    comps.push((vec![i, j], ScalarField::constant(n, w)));
                }
            }
        }
        FormField::symbolic(n, 2, comps).expect("valid omega form").with_closed_hint()
    }

    /// `omega^k` (wedge power, not divided by `k!`).
    pub fn omega_power(&self, k: usize) -> FormField {
        let mut acc = FormField::scalar(ScalarField::constant(self.dim, 1.0));
        let w = self.omega_form();
        for _ in 0..k {
            acc = acc.wedge(&w).expect("symbolic wedge");
        }
        acc.with_closed_hint()
    }

    pub fn coordinate_names(&self) -> Vec<String> {
        coordinate_names(self.dim)
    }
}

/// `X_f` with `i_{X_f} omega = df`.
pub fn hamiltonian_vector_field(ambient: &AmbientSpace, f: &FormField) -> Result<VectorField> {
    if f.degree() != 0 {
        return Err(Error::DegreeMismatch { expected: 0, got: f.degree() });
    }
    let n = ambient.dim();
    if f.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.dim() });
    }
    match f.as_scalar() {
        Some(s) => {
            let partials: Vec<ScalarField> = (0..n).map(|j| s.partial(j)).collect();
            let h = ambient.hamiltonian_matrix();
            let comps = (0..n)
                .map(|i| {
                    let parts: Vec<(f64, &ScalarField)> =
                        (0..n).filter(|&j| h[i * n + j] != 0.0).map(|j| (h[i * n + j], &partials[j])).collect();
                    ScalarField::sum(n, &parts)
                })
                .collect();
            Ok(VectorField::symbolic(comps))
        }
        None => {
            let f = f.clone();
            let amb = ambient.clone();
            Ok(VectorField::opaque(n, move |x| amb.hamiltonian_vector(&f.gradient(x))))
        }
    }
}

/// `{f, g} = omega(X_f, X_g) = df(X_g)`, so that `d/dt f(Fl_t^{X_g}) = {f, g}`.
pub fn poisson_bracket(ambient: &AmbientSpace, f: &FormField, g: &FormField) -> Result<FormField> {
    let xg = hamiltonian_vector_field(ambient, g)?;
    if f.degree() != 0 {
        return Err(Error::DegreeMismatch { expected: 0, got: f.degree() });
    }
    let df = exterior_derivative(f, DEFAULT_FD_STEP)?;
    interior_product(&df, &xg)
}
