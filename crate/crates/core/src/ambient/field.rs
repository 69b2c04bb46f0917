use std::fmt;
use std::sync::Arc;

use super::scalar::ScalarField;

type Kernel = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

const JACOBIAN_STEP: f64 = 1e-6;

#[derive(Clone)]
enum Repr {
    Symbolic(Vec<ScalarField>),
    Opaque(Kernel),
}

/// An autonomous vector field on the ambient space.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    repr: Repr,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Symbolic(c) => f.debug_struct("VectorField").field("components", c).finish(),
            Repr::Opaque(_) => f.debug_struct("VectorField").field("dim", &self.dim).finish_non_exhaustive(),
        }
    }
}

impl VectorField {
    pub fn symbolic(components: Vec<ScalarField>) -> Self {
        let dim = components.len();
        debug_assert!(components.iter().all(|c| c.nvars() == dim));
        VectorField { dim, repr: Repr::Symbolic(components) }
    }

    pub fn opaque<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        VectorField { dim, repr: Repr::Opaque(Arc::new(f)) }
    }

    pub fn zero(dim: usize) -> Self {
        Self::symbolic(vec![ScalarField::zero(dim); dim])
    }

    pub fn constant(v: Vec<f64>) -> Self {
        let n = v.len();
        Self::symbolic(v.into_iter().map(|c| ScalarField::constant(n, c)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> Option<&[ScalarField]> {
        match &self.repr {
            Repr::Symbolic(c) => Some(c),
            Repr::Opaque(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(&self.repr, Repr::Symbolic(c) if c.iter().all(ScalarField::is_zero))
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match &self.repr {
            Repr::Symbolic(c) => c.iter().map(|f| f.eval(x)).collect(),
            Repr::Opaque(k) => k(x),
        }
    }

    /// Row-major Jacobian `J[i][j] = d X_i / d x_j`.
    pub fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        match &self.repr {
            Repr::Symbolic(c) => {
                let mut out = vec![0.0; n * n];
                for (i, f) in c.iter().enumerate() {
                    f.eval_grad(x, &mut out[i * n..(i + 1) * n]);
                }
                out
            }
            Repr::Opaque(k) => fd_jacobian(n, x, |y| k(y)),
        }
    }

    pub fn scale(&self, s: f64) -> VectorField {
        match &self.repr {
            Repr::Symbolic(c) => Self::symbolic(c.iter().map(|f| f.scale(s)).collect()),
            Repr::Opaque(k) => {
                let k = k.clone();
                Self::opaque(self.dim, move |x| k(x).into_iter().map(|v| v * s).collect())
            }
        }
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        match (&self.repr, &other.repr) {
            (Repr::Symbolic(a), Repr::Symbolic(b)) => Self::symbolic(a.iter().zip(b).map(|(f, g)| f.add(g)).collect()),
            _ => {
                let (a, b) = (self.clone(), other.clone());
                Self::opaque(self.dim, move |x| crate::linalg::add(&a.eval(x), &b.eval(x)))
            }
        }
    }

    /// `[X, Y] = DY.X - DX.Y`, the bracket with `[zeta_X, zeta_Y] = zeta_[X,Y]`.
    pub fn bracket(&self, other: &VectorField) -> VectorField {
        let n = self.dim;
        match (&self.repr, &other.repr) {
            (Repr::Symbolic(x), Repr::Symbolic(y)) => {
                let comps = (0..n)
                    .map(|i| {
                        let mut acc = ScalarField::zero(n);
                        for j in 0..n {
                            acc = acc.add(&y[i].partial(j).mul(&x[j])).sub(&x[i].partial(j).mul(&y[j]));
                        }
                        acc
                    })
                    .collect();
                Self::symbolic(comps)
            }
            _ => {
                let (a, b) = (self.clone(), other.clone());
                Self::opaque(n, move |p| {
                    let (xa, xb) = (a.eval(p), b.eval(p));
                    let (ja, jb) = (a.jacobian(p), b.jacobian(p));
                    (0..n)
                        .map(|i| (0..n).map(|j| jb[i * n + j] * xa[j] - ja[i * n + j] * xb[j]).sum())
                        .collect()
                })
            }
        }
    }
}

pub(crate) fn fd_jacobian(n: usize, x: &[f64], f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + JACOBIAN_STEP;
        let fp = f(&xp);
        xp[j] = x[j] - JACOBIAN_STEP;
        let fm = f(&xp);
        xp[j] = x[j];
        for i in 0..n {
            out[i * n + j] = (fp[i] - fm[i]) / (2.0 * JACOBIAN_STEP);
        }
    }
    out
}

/// Right-hand side of `x' = X_t(x)` for the integrator.
pub trait Dynamics: Send + Sync {
    fn dim(&self) -> usize;
    fn velocity(&self, t: f64, x: &[f64]) -> Vec<f64>;
    fn jacobian(&self, t: f64, x: &[f64]) -> Vec<f64> {
        fd_jacobian(self.dim(), x, |y| self.velocity(t, y))
    }
}

impl Dynamics for VectorField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn velocity(&self, _t: f64, x: &[f64]) -> Vec<f64> {
        self.eval(x)
    }

    fn jacobian(&self, _t: f64, x: &[f64]) -> Vec<f64> {
        VectorField::jacobian(self, x)
    }
}

/// A time-dependent field given by a closure `(t, x) -> X_t(x)`.
pub struct TimeDependentField<F> {
    dim: usize,
    f: F,
}

impl<F> TimeDependentField<F>
where
    F: Fn(f64, &[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        TimeDependentField { dim, f }
    }
}

impl<F> Dynamics for TimeDependentField<F>
where
    F: Fn(f64, &[f64]) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn velocity(&self, t: f64, x: &[f64]) -> Vec<f64> {
        (self.f)(t, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::Wave;
    use approx::assert_abs_diff_eq;

    fn sample() -> VectorField {
        VectorField::symbolic(vec![
            ScalarField::trig(0.5, Wave::Sin, vec![0, 1, 0, 0]),
            ScalarField::trig(1.0, Wave::Cos, vec![1, 0, 1, 0]),
            ScalarField::coordinate(4, 3),
            ScalarField::zero(4),
        ])
    }

    #[test]
    fn jacobian_matches_fd() {
        let x = sample();
        let p = [0.3, 0.8, -0.4, 1.1];
        let j = x.jacobian(&p);
        let jfd = fd_jacobian(4, &p, |y| x.eval(y));
        for k in 0..16 {
            assert_abs_diff_eq!(j[k], jfd[k], epsilon = 1e-8);
        }
    }

    #[test]
    fn symbolic_and_opaque_brackets_agree() {
        let x = sample();
        let y = VectorField::symbolic(vec![
            ScalarField::zero(4),
            ScalarField::trig(0.7, Wave::Sin, vec![1, 1, 0, 0]),
            ScalarField::constant(4, 1.0),
            ScalarField::trig(0.2, Wave::Cos, vec![0, 0, 1, 1]),
        ]);
        let xo = {
            let x = x.clone();
            VectorField::opaque(4, move |p| x.eval(p))
        };
        let p = [0.9, -0.2, 0.5, 0.3];
        let s = x.bracket(&y).eval(&p);
        let o = xo.bracket(&y).eval(&p);
        for k in 0..4 {
            assert_abs_diff_eq!(s[k], o[k], epsilon = 1e-8);
        }
        let yx = y.bracket(&x).eval(&p);
        for k in 0..4 {
            assert_abs_diff_eq!(s[k], -yx[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn trig_fields_are_periodic() {
        let x = VectorField::symbolic(vec![
            ScalarField::trig(0.5, Wave::Sin, vec![0, 1]),
            ScalarField::trig(1.0, Wave::Cos, vec![2, -1]),
        ]);
        let tau = 2.0 * std::f64::consts::PI;
        let p = [0.3, 1.4];
        let a = x.eval(&p);
        let b = x.eval(&[p[0] + tau, p[1] - 3.0 * tau]);
        for k in 0..2 {
            assert_abs_diff_eq!(a[k], b[k], epsilon = 1e-12);
        }
    }
}
