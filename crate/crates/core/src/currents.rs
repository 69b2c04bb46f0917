//! Flags as currents, seen through their pairings with mixed-degree forms.

use serde::{Deserialize, Serialize};

use crate::ambient::{exterior_derivative, AmbientSpace, FormField, ScalarField, DEFAULT_FD_STEP};
use crate::error::{Error, Result};
use crate::flagmesh::{integrate_over_level, FlagEmbedding};
use crate::linalg;
use crate::par;

pub const DEFAULT_SEPARATION_TOL: f64 = 1e-9;

/// A sum of forms of distinct degrees.
#[derive(Clone, Debug)]
pub struct MixedForm {
    dim: usize,
    components: Vec<FormField>,
    label: Option<String>,
}

impl MixedForm {
    pub fn new(dim: usize, components: Vec<FormField>) -> Result<Self> {
        let mut seen = vec![false; dim + 1];
        for c in &components {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: c.dim() });
            }
            if c.degree() > dim {
                return Err(Error::TopDegree { degree: c.degree(), dim });
            }
            if std::mem::replace(&mut seen[c.degree()], true) {
                return Err(Error::InvalidArgument(format!("two components of degree {}", c.degree())));
            }
        }
        Ok(MixedForm { dim, components, label: None })
    }

    pub fn single(form: FormField) -> Self {
        MixedForm { dim: form.dim(), components: vec![form], label: None }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[FormField] {
        &self.components
    }

    pub fn component(&self, degree: usize) -> Option<&FormField> {
        self.components.iter().find(|c| c.degree() == degree)
    }

    /// `f + f w + f w^2 + ..`, one component per degree in `degrees`.
    pub fn moment_probe(ambient: &AmbientSpace, f: &ScalarField, degrees: &[usize]) -> Result<Self> {
        let mut ds: Vec<usize> = degrees.to_vec();
        ds.sort_unstable();
        ds.dedup();
        let comps = ds
            .iter()
            .map(|&d| {
                if d % 2 != 0 {
                    return Err(Error::OddDimension { level: 0, dim: d });
                }
                ambient.omega_power(d / 2).mul_scalar(f)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MixedForm::new(ambient.dim(), comps)?.with_label(f.label(&ambient.coordinate_names())))
    }
}

/// `sum_i int_{N_i} alpha_{dim N_i}`.
pub fn pair(flag: &FlagEmbedding, alpha: &MixedForm) -> Result<f64> {
    if alpha.dim != flag.ambient().dim() {
        return Err(Error::DimensionMismatch { expected: flag.ambient().dim(), got: alpha.dim });
    }
    let mut total = 0.0;
    for (i, d) in flag.level_dims().into_iter().enumerate() {
        if let Some(c) = alpha.component(d) {
            total += integrate_over_level(flag, i, c)?;
        }
    }
    Ok(total)
}

/// `|pair(flag, d beta)|`, zero for a closed flag up to quadrature error.
pub fn stokes_residual(flag: &FlagEmbedding, beta: &MixedForm) -> Result<f64> {
    let dims = flag.level_dims();
    let mut total = 0.0;
    for c in &beta.components {
        if c.degree() >= beta.dim {
            continue;
        }
        for (i, &d) in dims.iter().enumerate() {
            if d == c.degree() + 1 {
                total += integrate_over_level(flag, i, &exterior_derivative(c, DEFAULT_FD_STEP)?)?;
            }
        }
    }
    Ok(total.abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSweep {
    pub resolutions: Vec<usize>,
    pub residuals: Vec<f64>,
    /// Fitted order in the mesh size `1/n`.
    pub slope: f64,
}

/// Stokes residuals of `beta` on the flags built at each resolution.
pub fn stokes_sweep<B>(resolutions: &[usize], build: B, beta: &MixedForm) -> Result<ConvergenceSweep>
where
    B: Fn(usize) -> Result<FlagEmbedding>,
{
    let residuals = resolutions.iter().map(|&n| stokes_residual(&build(n)?, beta)).collect::<Result<Vec<_>>>()?;
    let h: Vec<f64> = resolutions.iter().map(|&n| 1.0 / n as f64).collect();
    Ok(ConvergenceSweep { resolutions: resolutions.to_vec(), slope: linalg::log_log_slope(&h, &residuals), residuals })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Separated,
    IndistinguishableOnProbes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub verdict: Verdict,
    /// First probe (in dictionary order) whose pairings differ by more than the tolerance.
    pub witness: Option<usize>,
    pub witness_label: Option<String>,
    pub differences: Vec<f64>,
    pub tolerance: f64,
    /// Some level dimension occurs twice in one of the flags; the probes may
    /// then fail to tell apart flags that swap those levels.
    pub repeated_level_dims: bool,
}

pub fn separation_test(a: &FlagEmbedding, b: &FlagEmbedding, probes: &[MixedForm], tol: f64) -> Result<Separation> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("empty probe list".into()));
    }
    let differences = par::try_map_range(probes.len(), |k| Ok::<_, Error>(pair(a, &probes[k])? - pair(b, &probes[k])?))?;
    let witness = differences.iter().position(|d| d.abs() > tol);
    let repeated = |f: &FlagEmbedding| f.level_dims().windows(2).any(|w| w[0] == w[1]);
    Ok(Separation {
        verdict: if witness.is_some() { Verdict::Separated } else { Verdict::IndistinguishableOnProbes },
        witness_label: witness.map(|k| probes[k].label().map(str::to_owned).unwrap_or_else(|| format!("probe {k}"))),
        witness,
        differences,
        tolerance: tol,
        repeated_level_dims: repeated(a) || repeated(b),
    })
}
