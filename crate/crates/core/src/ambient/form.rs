//! Differential forms on the flat ambient space.
//!
//! A form is either symbolic (coefficients are [`ScalarField`]s keyed by
//! increasing index sets, so `d`, `i_X` and wedge products are exact) or an
//! opaque evaluable kernel, for which `d` falls back to central differences.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::field::VectorField;
use super::scalar::ScalarField;
use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_FD_STEP: f64 = 1e-5;

type Kernel = Arc<dyn Fn(&[f64], &[&[f64]]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Symbolic(BTreeMap<Vec<usize>, ScalarField>),
    Opaque(Kernel),
}

#[derive(Clone)]
pub struct FormField {
    dim: usize,
    degree: usize,
    repr: Repr,
    d_analytic: Option<Arc<FormField>>,
    closed_hint: bool,
}

impl fmt::Debug for FormField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("FormField");
        s.field("dim", &self.dim).field("degree", &self.degree);
        match &self.repr {
            Repr::Symbolic(c) => s.field("components", c),
            Repr::Opaque(_) => s.field("components", &"<opaque>"),
        };
        s.field("closed_hint", &self.closed_hint).finish()
    }
}

/// Sorts `idx` in place, returning the permutation sign, or `None` if an
/// index repeats.
fn sort_with_sign(idx: &mut [usize]) -> Option<f64> {
    let mut sign = 1.0;
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

fn insert_component(map: &mut BTreeMap<Vec<usize>, ScalarField>, key: Vec<usize>, c: ScalarField) {
    if c.is_zero() {
        return;
    }
    match map.get_mut(&key) {
        Some(old) => {
            let sum = old.add(&c);
            if sum.is_zero() {
                map.remove(&key);
            } else {
                *old = sum;
            }
        }
        None => {
            map.insert(key, c);
        }
    }
}

impl FormField {
    pub fn symbolic(dim: usize, degree: usize, components: Vec<(Vec<usize>, ScalarField)>) -> Result<Self> {
        if degree > dim {
            return Err(Error::DegreeMismatch { expected: dim, got: degree });
        }
        let mut map = BTreeMap::new();
        for (mut idx, c) in components {
            if idx.len() != degree {
                return Err(Error::DegreeMismatch { expected: degree, got: idx.len() });
            }
            if let Some(&bad) = idx.iter().find(|&&i| i >= dim) {
                return Err(Error::InvalidArgument(format!("coordinate index {bad} out of range for dimension {dim}")));
            }
            if c.nvars() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: c.nvars() });
            }
            if let Some(sign) = sort_with_sign(&mut idx) {
                insert_component(&mut map, idx, c.scale(sign));
            }
        }
        Ok(FormField { dim, degree, repr: Repr::Symbolic(map), d_analytic: None, closed_hint: false })
    }

    pub fn zero(dim: usize, degree: usize) -> Self {
        FormField { dim, degree, repr: Repr::Symbolic(BTreeMap::new()), d_analytic: None, closed_hint: true }
    }

    pub fn scalar(f: ScalarField) -> Self {
        let dim = f.nvars();
        Self::symbolic(dim, 0, vec![(Vec::new(), f)]).expect("0-form")
    }

    /// `dx_{i_1} ^ ... ^ dx_{i_k}`.
    pub fn basis(dim: usize, idx: &[usize]) -> Result<Self> {
        Self::symbolic(dim, idx.len(), vec![(idx.to_vec(), ScalarField::constant(dim, 1.0))]).map(|f| f.with_closed_hint())
    }

    /// Constant-coefficient form `sum c_I dx_I`.
    pub fn constant(dim: usize, degree: usize, components: &[(Vec<usize>, f64)]) -> Result<Self> {
        let comps = components.iter().map(|(i, c)| (i.clone(), ScalarField::constant(dim, *c))).collect();
        Self::symbolic(dim, degree, comps).map(|f| f.with_closed_hint())
    }

    /// An evaluable form given by a kernel `(x, [v_1..v_k]) -> alpha_x(v_1..v_k)`.
    /// The kernel is trusted to be multilinear and alternating.
    pub fn opaque<F>(dim: usize, degree: usize, kernel: F) -> Self
    where
        F: Fn(&[f64], &[&[f64]]) -> f64 + Send + Sync + 'static,
    {
        FormField { dim, degree, repr: Repr::Opaque(Arc::new(kernel)), d_analytic: None, closed_hint: false }
    }

    /// Attaches an analytic exterior derivative.
    pub fn with_d(mut self, d: FormField) -> Result<Self> {
        if d.degree != self.degree + 1 || d.dim != self.dim {
            return Err(Error::DegreeMismatch { expected: self.degree + 1, got: d.degree });
        }
        self.d_analytic = Some(Arc::new(d));
        Ok(self)
    }

    pub fn with_closed_hint(mut self) -> Self {
        self.closed_hint = true;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_symbolic(&self) -> bool {
        matches!(self.repr, Repr::Symbolic(_))
    }

    pub fn closed_hint(&self) -> bool {
        self.closed_hint
    }

    pub fn d_analytic(&self) -> Option<&FormField> {
        self.d_analytic.as_deref()
    }

    /// The coefficient function of a symbolic 0-form.
    pub fn as_scalar(&self) -> Option<ScalarField> {
        match &self.repr {
            Repr::Symbolic(map) if self.degree == 0 => {
                Some(map.get(&Vec::new()).cloned().unwrap_or_else(|| ScalarField::zero(self.dim)))
            }
            _ => None,
        }
    }

    /// Symbolic components `(I, c_I)`; `None` for opaque forms.
    pub fn components(&self) -> Option<impl Iterator<Item = (&Vec<usize>, &ScalarField)>> {
        match &self.repr {
            Repr::Symbolic(map) => Some(map.iter()),
            Repr::Opaque(_) => None,
        }
    }

    /// True when the form is symbolic with every coefficient zero.
    pub fn is_zero(&self) -> bool {
        matches!(&self.repr, Repr::Symbolic(map) if map.is_empty())
    }

    pub fn eval(&self, x: &[f64], vs: &[&[f64]]) -> f64 {
        debug_assert_eq!(vs.len(), self.degree);
        match &self.repr {
            Repr::Opaque(k) => k(x, vs),
            Repr::Symbolic(map) => {
                let k = self.degree;
                let mut total = 0.0;
                let mut rows = vec![vec![0.0; k]; k];
                for (idx, c) in map {
                    for a in 0..k {
                        for b in 0..k {
                            rows[a][b] = vs[a][idx[b]];
                        }
                    }
                    let det = linalg::det(&rows);
                    if det != 0.0 {
                        total += det * c.eval(x);
                    }
                }
                total
            }
        }
    }

    /// Gradient of a 0-form; central differences for opaque kernels.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        if let Some(s) = self.as_scalar() {
            return s.gradient(x);
        }
        let h = DEFAULT_FD_STEP;
        let mut xp = x.to_vec();
        (0..self.dim)
            .map(|j| {
                xp[j] = x[j] + h;
                let fp = self.eval(&xp, &[]);
                xp[j] = x[j] - h;
                let fm = self.eval(&xp, &[]);
                xp[j] = x[j];
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    pub fn scale(&self, s: f64) -> FormField {
        match &self.repr {
            Repr::Symbolic(map) => {
                let comps = map.iter().map(|(i, c)| (i.clone(), c.scale(s))).collect();
                let mut out = Self::symbolic(self.dim, self.degree, comps).expect("scaled form");
                out.closed_hint = self.closed_hint;
                out
            }
            Repr::Opaque(k) => {
                let k = k.clone();
                let mut out = Self::opaque(self.dim, self.degree, move |x, v| s * k(x, v));
                out.closed_hint = self.closed_hint;
                out.d_analytic = self.d_analytic.as_ref().map(|d| Arc::new(d.scale(s)));
                out
            }
        }
    }

    pub fn add(&self, other: &FormField) -> Result<FormField> {
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch { expected: self.degree, got: other.degree });
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let closed = self.closed_hint && other.closed_hint;
        match (&self.repr, &other.repr) {
            (Repr::Symbolic(a), Repr::Symbolic(b)) => {
                let mut map = a.clone();
                for (i, c) in b {
                    insert_component(&mut map, i.clone(), c.clone());
                }
                Ok(FormField { dim: self.dim, degree: self.degree, repr: Repr::Symbolic(map), d_analytic: None, closed_hint: closed })
            }
            _ => {
                let (a, b) = (self.clone(), other.clone());
                let mut out = Self::opaque(self.dim, self.degree, move |x, v| a.eval(x, v) + b.eval(x, v));
                out.closed_hint = closed;
                Ok(out)
            }
        }
    }

    /// Exterior product; symbolic operands only.
    pub fn wedge(&self, other: &FormField) -> Result<FormField> {
        let (Repr::Symbolic(a), Repr::Symbolic(b)) = (&self.repr, &other.repr) else {
            return Err(Error::Unsupported("wedge product of opaque forms".into()));
        };
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let degree = self.degree + other.degree;
        if degree > self.dim {
            return Ok(FormField::zero(self.dim, self.dim));
        }
        let mut map = BTreeMap::new();
        for (i, ci) in a {
            for (j, cj) in b {
                let mut idx: Vec<usize> = i.iter().chain(j).copied().collect();
                if let Some(sign) = sort_with_sign(&mut idx) {
                    insert_component(&mut map, idx, ci.mul(cj).scale(sign));
                }
            }
        }
        Ok(FormField {
            dim: self.dim,
            degree,
            repr: Repr::Symbolic(map),
            d_analytic: None,
            closed_hint: self.closed_hint && other.closed_hint,
        })
    }

    /// `f * alpha` for a symbolic function `f`.
    pub fn mul_scalar(&self, f: &ScalarField) -> Result<FormField> {
        FormField::scalar(f.clone()).wedge(self)
    }

    /// Pullback by the affine map `y -> A y + b` (`a` row-major, square).
    pub fn pullback_affine(&self, a: &[Vec<f64>], b: &[f64]) -> Result<FormField> {
        let Repr::Symbolic(map) = &self.repr else {
            return Err(Error::Unsupported("analytic pullback of an opaque form".into()));
        };
        let n = self.dim;
        let theta: Vec<FormField> = (0..n)
            .map(|i| {
                let comps = (0..n).filter(|&j| a[i][j] != 0.0).map(|j| (vec![j], a[i][j])).collect::<Vec<_>>();
                FormField::constant(n, 1, &comps)
            })
            .collect::<Result<_>>()?;
        let mut out = FormField::zero(n, self.degree);
        for (idx, c) in map {
            let mut term = FormField::scalar(c.compose_affine(a, b)?);
            for &i in idx {
                term = term.wedge(&theta[i])?;
            }
            out = out.add(&term)?;
        }
        out.closed_hint = self.closed_hint;
        Ok(out)
    }

    fn symbolic_d(&self, map: &BTreeMap<Vec<usize>, ScalarField>) -> FormField {
        let mut out = BTreeMap::new();
        for (idx, c) in map {
            for j in 0..self.dim {
                if idx.contains(&j) {
                    continue;
                }
                let p = c.partial(j);
                if p.is_zero() {
                    continue;
                }
                let before = idx.iter().filter(|&&i| i < j).count();
                let sign = if before % 2 == 0 { 1.0 } else { -1.0 };
                let mut key = idx.clone();
                key.insert(before, j);
                insert_component(&mut out, key, p.scale(sign));
            }
        }
        FormField { dim: self.dim, degree: self.degree + 1, repr: Repr::Symbolic(out), d_analytic: None, closed_hint: true }
    }
}

fn check_d_degree(form: &FormField, step: f64) -> Result<()> {
    if form.degree >= form.dim {
        return Err(Error::TopDegree { degree: form.degree, dim: form.dim });
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {step}")));
    }
    Ok(())
}

/// `d alpha`: the attached analytic derivative if any, the exact symbolic
/// derivative for symbolic forms, central differences otherwise.
pub fn exterior_derivative(form: &FormField, step: f64) -> Result<FormField> {
    check_d_degree(form, step)?;
    if let Some(d) = &form.d_analytic {
        return Ok((**d).clone());
    }
    match &form.repr {
        Repr::Symbolic(map) => Ok(form.symbolic_d(map)),
        Repr::Opaque(_) => exterior_derivative_fd(form, step),
    }
}

/// `d alpha` by the alternating sum of central directional differences,
/// `d alpha(v_0..v_k) = sum_i (-1)^i D_{v_i} alpha(v_0..^v_i..v_k)`,
/// valid for constant vector arguments.
pub fn exterior_derivative_fd(form: &FormField, step: f64) -> Result<FormField> {
    check_d_degree(form, step)?;
    let inner = form.clone();
    let k = form.degree;
    Ok(FormField::opaque(form.dim, k + 1, move |x, vs| {
        let mut total = 0.0;
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        for i in 0..=k {
            let len = linalg::norm(vs[i]);
            if len == 0.0 {
                continue;
            }
            for j in 0..x.len() {
                let u = vs[i][j] / len;
                xp[j] = x[j] + step * u;
                xm[j] = x[j] - step * u;
            }
            let rest: Vec<&[f64]> = vs.iter().enumerate().filter(|(a, _)| *a != i).map(|(_, v)| *v).collect();
            let dd = len * (inner.eval(&xp, &rest) - inner.eval(&xm, &rest)) / (2.0 * step);
            total += if i % 2 == 0 { dd } else { -dd };
        }
        total
    }))
}

/// `(i_X alpha)(v_1..v_{k-1}) = alpha(X, v_1..v_{k-1})`.
pub fn interior_product(form: &FormField, x: &VectorField) -> Result<FormField> {
    if form.degree == 0 {
        return Err(Error::ZeroDegreeContraction);
    }
    if x.dim() != form.dim {
        return Err(Error::DimensionMismatch { expected: form.dim, got: x.dim() });
    }
    match (&form.repr, x.components()) {
        (Repr::Symbolic(map), Some(xs)) => {
            let mut out = BTreeMap::new();
            for (idx, c) in map {
                for (a, &i) in idx.iter().enumerate() {
                    if xs[i].is_zero() {
                        continue;
                    }
                    let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
                    let mut key = idx.clone();
                    key.remove(a);
                    insert_component(&mut out, key, c.mul(&xs[i]).scale(sign));
                }
            }
            Ok(FormField { dim: form.dim, degree: form.degree - 1, repr: Repr::Symbolic(out), d_analytic: None, closed_hint: false })
        }
        _ => {
            let (alpha, field) = (form.clone(), x.clone());
            Ok(FormField::opaque(form.dim, form.degree - 1, move |p, vs| {
                let xv = field.eval(p);
                let mut args: Vec<&[f64]> = Vec::with_capacity(vs.len() + 1);
                args.push(&xv);
                args.extend_from_slice(vs);
                alpha.eval(p, &args)
            }))
        }
    }
}

/// Cartan's formula `L_X alpha = i_X d alpha + d i_X alpha`.
pub fn lie_derivative(form: &FormField, x: &VectorField, step: f64) -> Result<FormField> {
    if form.degree == 0 {
        return interior_product(&exterior_derivative(form, step)?, x);
    }
    let d_ix = exterior_derivative(&interior_product(form, x)?, step)?;
    if form.degree == form.dim {
        return Ok(d_ix);
    }
    let i_dx = interior_product(&exterior_derivative(form, step)?, x)?;
    i_dx.add(&d_ix)
}
