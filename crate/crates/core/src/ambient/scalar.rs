//! Symbolic scalar fields: finite sums of `c * x^p * cos(m.x)` and
//! `c * x^p * sin(m.x)` with integer frequency vectors `m`.
//!
//! The class is closed under sums, products and partial derivatives, which is
//! what lets forms, Hamiltonian fields and brackets stay analytic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wave {
    Cos,
    Sin,
}

/// One term `coeff * prod_j x_j^powers[j] * wave(freq . x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub wave: Wave,
    pub freq: Vec<i32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub powers: Vec<u32>,
}

impl Term {
    pub fn trig(coeff: f64, wave: Wave, freq: Vec<i32>) -> Self {
        Term { coeff, wave, freq, powers: Vec::new() }
    }

    fn phase(&self, x: &[f64]) -> f64 {
        self.freq.iter().zip(x).map(|(&m, &xi)| m as f64 * xi).sum()
    }

    fn monomial(&self, x: &[f64]) -> f64 {
        self.powers
            .iter()
            .zip(x)
            .filter(|(&p, _)| p > 0)
            .map(|(&p, &xi)| xi.powi(p as i32))
            .product()
    }

    /// d/dx_j of the monomial factor.
    fn monomial_partial(&self, x: &[f64], j: usize) -> f64 {
        let pj = self.powers.get(j).copied().unwrap_or(0);
        if pj == 0 {
            return 0.0;
        }
        let mut v = pj as f64 * x[j].powi(pj as i32 - 1);
        for (k, (&p, &xk)) in self.powers.iter().zip(x).enumerate() {
            if k != j && p > 0 {
                v *= xk.powi(p as i32);
            }
        }
        v
    }

    fn monomial_partial2(&self, x: &[f64], j: usize, k: usize) -> f64 {
        let pj = self.powers.get(j).copied().unwrap_or(0);
        let pk = self.powers.get(k).copied().unwrap_or(0);
        if j == k {
            if pj < 2 {
                return 0.0;
            }
            let mut v = (pj * (pj - 1)) as f64 * x[j].powi(pj as i32 - 2);
            for (l, (&p, &xl)) in self.powers.iter().zip(x).enumerate() {
                if l != j && p > 0 {
                    v *= xl.powi(p as i32);
                }
            }
            v
        } else {
            if pj == 0 || pk == 0 {
                return 0.0;
            }
            let mut v = pj as f64 * x[j].powi(pj as i32 - 1) * pk as f64 * x[k].powi(pk as i32 - 1);
            for (l, (&p, &xl)) in self.powers.iter().zip(x).enumerate() {
                if l != j && l != k && p > 0 {
                    v *= xl.powi(p as i32);
                }
            }
            v
        }
    }

    fn has_monomial(&self) -> bool {
        self.powers.iter().any(|&p| p > 0)
    }
}

/// Returns `(T, T', T'')` for the wave evaluated at phase `phi`.
fn wave_values(w: Wave, phi: f64) -> (f64, f64, f64) {
    let (s, c) = phi.sin_cos();
    match w {
        Wave::Cos => (c, -s, -c),
        Wave::Sin => (s, c, -s),
    }
}

type Key = (Vec<u32>, Vec<i32>, Wave);

/// A symbolic scalar function of `nvars` real variables.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    nvars: usize,
    terms: Vec<Term>,
}

impl ScalarField {
    pub fn zero(nvars: usize) -> Self {
        ScalarField { nvars, terms: Vec::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::from_terms(nvars, vec![Term::trig(c, Wave::Cos, vec![0; nvars])]).expect("valid constant")
    }

    /// The coordinate function `x_j`.
    pub fn coordinate(nvars: usize, j: usize) -> Self {
        let mut powers = vec![0; nvars];
        powers[j] = 1;
        Self::from_terms(nvars, vec![Term { coeff: 1.0, wave: Wave::Cos, freq: vec![0; nvars], powers }])
            .expect("valid coordinate")
    }

    /// `coeff * wave(freq . x)`.
    pub fn trig(coeff: f64, wave: Wave, freq: Vec<i32>) -> Self {
        let n = freq.len();
        Self::from_terms(n, vec![Term::trig(coeff, wave, freq)]).expect("valid trig term")
    }

    /// Builds a field from raw terms, validating lengths and normalising.
    pub fn from_terms(nvars: usize, terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if t.freq.len() != nvars {
                return Err(Error::DimensionMismatch { expected: nvars, got: t.freq.len() });
            }
            if !t.powers.is_empty() && t.powers.len() != nvars {
                return Err(Error::DimensionMismatch { expected: nvars, got: t.powers.len() });
            }
            if !t.coeff.is_finite() {
                return Err(Error::InvalidArgument("non-finite coefficient".into()));
            }
        }
        let mut acc: BTreeMap<Key, f64> = BTreeMap::new();
        for t in terms {
            Self::accumulate(&mut acc, nvars, t.coeff, t.wave, t.freq, t.powers);
        }
        Ok(Self::from_map(nvars, acc))
    }

    fn accumulate(acc: &mut BTreeMap<Key, f64>, nvars: usize, mut coeff: f64, wave: Wave, mut freq: Vec<i32>, mut powers: Vec<u32>) {
        if coeff == 0.0 {
            return;
        }
        if powers.is_empty() {
            powers = vec![0; nvars];
        }
        match freq.iter().find(|&&m| m != 0) {
            None => {
                if wave == Wave::Sin {
                    return;
                }
            }
            Some(&first) if first < 0 => {
                freq.iter_mut().for_each(|m| *m = -*m);
                if wave == Wave::Sin {
                    coeff = -coeff;
                }
            }
            _ => {}
        }
        *acc.entry((powers, freq, wave)).or_insert(0.0) += coeff;
    }

    fn from_map(nvars: usize, acc: BTreeMap<Key, f64>) -> Self {
        let terms = acc
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|((powers, freq, wave), coeff)| Term { coeff, wave, freq, powers })
            .collect();
        ScalarField { nvars, terms }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when the field has no polynomial factors, i.e. it is periodic with
    /// period `2 pi` in every variable.
    pub fn is_trigonometric(&self) -> bool {
        self.terms.iter().all(|t| !t.has_monomial())
    }

    /// Largest `|m|_1` among the terms.
    pub fn max_frequency(&self) -> u32 {
        self.terms.iter().map(|t| t.freq.iter().map(|m| m.unsigned_abs()).sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let (w, _, _) = wave_values(t.wave, t.phase(x));
                t.coeff * t.monomial(x) * w
            })
            .sum()
    }

    /// Value and gradient.
    pub fn eval_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        for t in &self.terms {
            let (w, dw, _) = wave_values(t.wave, t.phase(x));
            let mono = t.monomial(x);
            value += t.coeff * mono * w;
            let poly = t.has_monomial();
            for j in 0..self.nvars {
                let mut d = t.coeff * mono * t.freq[j] as f64 * dw;
                if poly {
                    d += t.coeff * t.monomial_partial(x, j) * w;
                }
                grad[j] += d;
            }
        }
        value
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.nvars];
        self.eval_grad(x, &mut g);
        g
    }

    /// Hessian as a row-major `nvars x nvars` array.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let n = self.nvars;
        let mut h = vec![0.0; n * n];
        for t in &self.terms {
            let (w, dw, ddw) = wave_values(t.wave, t.phase(x));
            let mono = t.monomial(x);
            let poly = t.has_monomial();
            for j in 0..n {
                for k in j..n {
                    let mj = t.freq[j] as f64;
                    let mk = t.freq[k] as f64;
                    let mut d = mono * mj * mk * ddw;
                    if poly {
                        d += t.monomial_partial2(x, j, k) * w
                            + (t.monomial_partial(x, j) * mk + t.monomial_partial(x, k) * mj) * dw;
                    }
                    h[j * n + k] += t.coeff * d;
                }
            }
        }
        for j in 0..n {
            for k in 0..j {
                h[j * n + k] = h[k * n + j];
            }
        }
        h
    }

    pub fn partial(&self, j: usize) -> ScalarField {
        let mut acc = BTreeMap::new();
        for t in &self.terms {
            let m = t.freq[j];
            if m != 0 {
                // d/dx cos(phi) = -m sin(phi), d/dx sin(phi) = m cos(phi)
                let (wave, c) = match t.wave {
                    Wave::Cos => (Wave::Sin, -(m as f64)),
                    Wave::Sin => (Wave::Cos, m as f64),
                };
                Self::accumulate(&mut acc, self.nvars, t.coeff * c, wave, t.freq.clone(), t.powers.clone());
            }
            let pj = t.powers.get(j).copied().unwrap_or(0);
            if pj > 0 {
                let mut powers = t.powers.clone();
                powers[j] -= 1;
                Self::accumulate(&mut acc, self.nvars, t.coeff * pj as f64, t.wave, t.freq.clone(), powers);
            }
        }
        Self::from_map(self.nvars, acc)
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        if s == 0.0 {
            return ScalarField::zero(self.nvars);
        }
        let terms = self.terms.iter().map(|t| Term { coeff: t.coeff * s, ..t.clone() }).collect();
        ScalarField { nvars: self.nvars, terms }
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.linear_combination(&[(1.0, self), (1.0, other)])
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.linear_combination(&[(1.0, self), (-1.0, other)])
    }

    /// `sum_k c_k f_k`, all fields in `nvars(self)` variables.
    pub fn linear_combination(&self, parts: &[(f64, &ScalarField)]) -> ScalarField {
        let mut acc = BTreeMap::new();
        for (c, f) in parts {
            debug_assert_eq!(f.nvars, self.nvars);
            for t in &f.terms {
                Self::accumulate(&mut acc, self.nvars, c * t.coeff, t.wave, t.freq.clone(), t.powers.clone());
            }
        }
        Self::from_map(self.nvars, acc)
    }

    pub fn sum(nvars: usize, parts: &[(f64, &ScalarField)]) -> ScalarField {
        ScalarField::zero(nvars).linear_combination(parts)
    }

    /// Pointwise product via the product-to-sum identities.
    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        let n = self.nvars;
        let mut acc = BTreeMap::new();
        for a in &self.terms {
            for b in &other.terms {
                let powers: Vec<u32> = if a.has_monomial() || b.has_monomial() {
                    (0..n)
                        .map(|j| a.powers.get(j).copied().unwrap_or(0) + b.powers.get(j).copied().unwrap_or(0))
                        .collect()
                } else {
                    vec![0; n]
                };
                let plus: Vec<i32> = a.freq.iter().zip(&b.freq).map(|(x, y)| x + y).collect();
                let minus: Vec<i32> = a.freq.iter().zip(&b.freq).map(|(x, y)| x - y).collect();
                let c = 0.5 * a.coeff * b.coeff;
                use Wave::*;
                // cos a cos b = (cos(a-b) + cos(a+b)) / 2, etc.
                let pieces: [(f64, Wave, &Vec<i32>); 2] = match (a.wave, b.wave) {
                    (Cos, Cos) => [(c, Cos, &minus), (c, Cos, &plus)],
                    (Sin, Sin) => [(c, Cos, &minus), (-c, Cos, &plus)],
                    (Sin, Cos) => [(c, Sin, &plus), (c, Sin, &minus)],
                    (Cos, Sin) => [(c, Sin, &plus), (-c, Sin, &minus)],
                };
                for (coeff, wave, freq) in pieces {
                    Self::accumulate(&mut acc, n, coeff, wave, freq.clone(), powers.clone());
                }
            }
        }
        Self::from_map(n, acc)
    }

    /// `f(A y + b)` as a field in `y`. `a` is row-major `nvars x new_nvars`.
    /// Trigonometric terms require `A^T m` to be integral.
    pub fn compose_affine(&self, a: &[Vec<f64>], b: &[f64]) -> Result<ScalarField> {
        let new_n = a.first().map(|r| r.len()).unwrap_or(0);
        if a.len() != self.nvars || b.len() != self.nvars {
            return Err(Error::DimensionMismatch { expected: self.nvars, got: a.len() });
        }
        let lin: Vec<ScalarField> = (0..self.nvars)
            .map(|i| {
                let mut f = ScalarField::constant(new_n, b[i]);
                for (j, &aij) in a[i].iter().enumerate() {
                    if aij != 0.0 {
                        f = f.add(&ScalarField::coordinate(new_n, j).scale(aij));
                    }
                }
                f
            })
            .collect();
        let mut out = ScalarField::zero(new_n);
        for t in &self.terms {
            let mut k = vec![0i32; new_n];
            for (j, kj) in k.iter_mut().enumerate() {
                let v: f64 = (0..self.nvars).map(|i| a[i][j] * t.freq[i] as f64).sum();
                let r = v.round();
                if (v - r).abs() > 1e-9 {
                    return Err(Error::Unsupported(
                        "affine pullback produces non-integer frequencies".into(),
                    ));
                }
                *kj = r as i32;
            }
            let shift: f64 = t.freq.iter().zip(b).map(|(&m, &bi)| m as f64 * bi).sum();
            let (s, c) = shift.sin_cos();
            let trig = match t.wave {
                Wave::Cos => ScalarField::sum(
                    new_n,
                    &[(c, &ScalarField::trig(1.0, Wave::Cos, k.clone())), (-s, &ScalarField::trig(1.0, Wave::Sin, k.clone()))],
                ),
                Wave::Sin => ScalarField::sum(
                    new_n,
                    &[(s, &ScalarField::trig(1.0, Wave::Cos, k.clone())), (c, &ScalarField::trig(1.0, Wave::Sin, k.clone()))],
                ),
            };
            let mut term = trig.scale(t.coeff);
            for (i, &p) in t.powers.iter().enumerate() {
                for _ in 0..p {
                    term = term.mul(&lin[i]);
                }
            }
            out = out.add(&term);
        }
        Ok(out)
    }

    /// Human-readable rendering, e.g. `cos(x1)` or `0.5*sin(x1-y2)`.
    pub fn label(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        self.terms
            .iter()
            .map(|t| {
                let mut phase = String::new();
                for (j, &m) in t.freq.iter().enumerate() {
                    if m == 0 {
                        continue;
                    }
                    let sign = if m < 0 { "-" } else if phase.is_empty() { "" } else { "+" };
                    let mag = m.unsigned_abs();
                    if mag == 1 {
                        phase.push_str(&format!("{sign}{}", names[j]));
                    } else {
                        phase.push_str(&format!("{sign}{mag}{}", names[j]));
                    }
                }
                let mut s = if phase.is_empty() {
                    String::new()
                } else {
                    format!("{}({phase})", if t.wave == Wave::Cos { "cos" } else { "sin" })
                };
                for (j, &p) in t.powers.iter().enumerate() {
                    if p > 0 {
                        let f = if p == 1 { names[j].clone() } else { format!("{}^{p}", names[j]) };
                        s = if s.is_empty() { f } else { format!("{f}*{s}") };
                    }
                }
                if s.is_empty() {
                    format!("{}", t.coeff)
                } else if t.coeff == 1.0 {
                    s
                } else {
                    format!("{}*{s}", t.coeff)
                }
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// Default coordinate names `x1, y1, x2, y2, ...` for a `2n`-dimensional space,
/// `s1, s2, ...` otherwise.
pub fn coordinate_names(n: usize) -> Vec<String> {
    if n % 2 == 0 {
        (0..n).map(|j| format!("{}{}", if j % 2 == 0 { "x" } else { "y" }, j / 2 + 1)).collect()
    } else {
        (0..n).map(|j| format!("s{}", j + 1)).collect()
    }
}

/// Trig monomials `cos(m.x)`, `sin(m.x)` with `|m|_1 <= cap`, one per `+-m`:
/// the constant first, then by `|m|_1`, reverse-lexicographic in `m`, cosine before sine.
pub fn trig_dictionary(nvars: usize, cap: u32) -> Vec<ScalarField> {
    let c = cap as i32;
    let mut freqs: Vec<Vec<i32>> = Vec::new();
    let mut m = vec![-c; nvars];
    loop {
        let l1: i32 = m.iter().map(|v| v.abs()).sum();
        let leading_positive = m.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0);
        if l1 <= c && leading_positive {
            freqs.push(m.clone());
        }
        let Some(j) = (0..nvars).rev().find(|&j| m[j] < c) else { break };
        m[j] += 1;
        for v in m.iter_mut().skip(j + 1) {
            *v = -c;
        }
    }
    freqs.sort_by(|a, b| {
        let (la, lb): (i32, i32) = (a.iter().map(|v| v.abs()).sum(), b.iter().map(|v| v.abs()).sum());
        la.cmp(&lb).then_with(|| b.cmp(a))
    });
    let mut out = vec![ScalarField::constant(nvars, 1.0)];
    for f in freqs {
        out.push(ScalarField::trig(1.0, Wave::Cos, f.clone()));
        out.push(ScalarField::trig(1.0, Wave::Sin, f));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dictionary_size_and_order() {
        let d = trig_dictionary(4, 2);
        assert_eq!(d.len(), 41);
        let names = coordinate_names(4);
        assert_eq!(d[1].label(&names), "cos(x1)");
        assert_eq!(d[2].label(&names), "sin(x1)");
        assert_eq!(trig_dictionary(2, 1).len(), 5);
    }
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sample_field() -> ScalarField {
        ScalarField::from_terms(
            3,
            vec![
                Term::trig(0.7, Wave::Cos, vec![1, -2, 0]),
                Term::trig(-0.3, Wave::Sin, vec![0, 1, 1]),
                Term { coeff: 0.25, wave: Wave::Cos, freq: vec![1, 0, 0], powers: vec![0, 2, 1] },
            ],
        )
        .unwrap()
    }

    #[test]
    fn negative_frequencies_are_folded() {
        let f = ScalarField::from_terms(2, vec![Term::trig(1.0, Wave::Sin, vec![-1, 2])]).unwrap();
        assert_eq!(f.terms()[0].freq, vec![1, -2]);
        assert_eq!(f.terms()[0].coeff, -1.0);
        let z = ScalarField::from_terms(2, vec![Term::trig(1.0, Wave::Sin, vec![0, 0])]).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn gradient_matches_symbolic_partials() {
        let f = sample_field();
        let x = [0.3, -1.1, 0.8];
        let g = f.gradient(&x);
        for j in 0..3 {
            assert_abs_diff_eq!(g[j], f.partial(j).eval(&x), epsilon = 1e-13);
        }
        let h = f.hessian(&x);
        for j in 0..3 {
            for k in 0..3 {
                assert_abs_diff_eq!(h[j * 3 + k], f.partial(j).partial(k).eval(&x), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let f = sample_field();
        let x = [0.9, 0.4, -0.2];
        let g = f.gradient(&x);
        let s = 1e-6;
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += s;
            xm[j] -= s;
            assert_abs_diff_eq!(g[j], (f.eval(&xp) - f.eval(&xm)) / (2.0 * s), epsilon = 1e-8);
        }
    }

    #[test]
    fn label_renders_terms() {
        let names = coordinate_names(4);
        assert_eq!(ScalarField::trig(1.0, Wave::Cos, vec![1, 0, 0, 0]).label(&names), "cos(x1)");
        assert_eq!(ScalarField::trig(2.0, Wave::Sin, vec![0, 1, 0, -2]).label(&names), "2*sin(y1-2y2)");
        assert_eq!(ScalarField::coordinate(4, 1).label(&names), "y1");
    }

    #[test]
    fn affine_composition_shifts_and_shears() {
        let f = sample_field();
        let a = vec![vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let b = vec![0.4, -0.2, 1.0];
        let g = f.compose_affine(&a, &b).unwrap();
        let y = [0.2, 0.7, -0.5];
        let x: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[i][j] * y[j]).sum::<f64>() + b[i]).collect();
        assert_abs_diff_eq!(g.eval(&y), f.eval(&x), epsilon = 1e-12);
        let bad = vec![vec![0.5, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert!(f.compose_affine(&bad, &b).is_err());
    }

    proptest! {
        #[test]
        fn product_is_pointwise(
            c1 in -2.0f64..2.0, c2 in -2.0f64..2.0,
            m in proptest::collection::vec(-2i32..=2, 3),
            k in proptest::collection::vec(-2i32..=2, 3),
            x in proptest::collection::vec(-3.0f64..3.0, 3),
        ) {
            let f = sample_field().add(&ScalarField::trig(c1, Wave::Sin, m));
            let g = ScalarField::trig(c2, Wave::Cos, k).add(&ScalarField::coordinate(3, 0));
            let fg = f.mul(&g);
            prop_assert!((fg.eval(&x) - f.eval(&x) * g.eval(&x)).abs() < 1e-11);
        }
    }
}
