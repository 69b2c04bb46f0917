//! Quadrature snapshots of a level: points, tangent frames and signed weights,
//! with `sum_q w_q alpha_{x_q}(frame_q) = int_{N_i} alpha`.

use std::sync::Arc;

use super::flag::FlagEmbedding;
use super::quadrature::{segment_rule, triangle_rule};
use crate::ambient::{AmbientMap, FormField, VectorField};
use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Debug)]
pub struct LevelSamples {
    pub dim: usize,
    pub ambient_dim: usize,
    pub points: Vec<f64>,
    pub frames: Vec<f64>,
    pub weights: Vec<f64>,
    pub cells: Vec<usize>,
    pub bary: Vec<[f64; 3]>,
    pub n_attached: usize,
    pub attached: Vec<f64>,
}

struct CellSamples {
    points: Vec<f64>,
    frames: Vec<f64>,
    weights: Vec<f64>,
    bary: Vec<[f64; 3]>,
}

/// Reference nodes for a cell of intrinsic dimension `d`: barycentric
/// coordinates and weights normalised so that the frame determinant is the
/// Jacobian of the affine parametrization.
fn reference_rule(flag: &FlagEmbedding, d: usize) -> Result<Vec<([f64; 3], f64)>> {
    let q = flag.quadrature();
    Ok(match d {
        0 => vec![([1.0, 0.0, 0.0], 1.0)],
        1 => segment_rule(q.segment_points)?.into_iter().map(|(t, w)| ([1.0 - t, t, 0.0], w)).collect(),
        _ => triangle_rule(q.triangle_degree)?.into_iter().map(|(l, w)| (l, 0.5 * w)).collect(),
    })
}

impl LevelSamples {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, q: usize) -> &[f64] {
        let n = self.ambient_dim;
        &self.points[q * n..(q + 1) * n]
    }

    pub fn frame(&self, q: usize) -> Vec<&[f64]> {
        let n = self.ambient_dim;
        let base = q * self.dim * n;
        (0..self.dim).map(|a| &self.frames[base + a * n..base + (a + 1) * n]).collect()
    }

    pub fn attached(&self, q: usize, k: usize) -> &[f64] {
        let n = self.ambient_dim;
        let base = (q * self.n_attached + k) * n;
        &self.attached[base..base + n]
    }

    /// `int alpha` over the level; `alpha` must have degree equal to the level dimension.
    pub fn integrate(&self, form: &FormField) -> Result<f64> {
        if form.degree() != self.dim {
            return Err(Error::DegreeMismatch { expected: self.dim, got: form.degree() });
        }
        if form.dim() != self.ambient_dim {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim, got: form.dim() });
        }
        Ok(par::sum_range(self.len(), |q| self.weights[q] * form.eval(self.point(q), &self.frame(q))))
    }

    /// `sum_q w_q g(q)` for an arbitrary per-sample integrand.
    pub fn integrate_with<F: Fn(usize) -> f64 + Sync>(&self, g: F) -> f64 {
        par::sum_range(self.len(), |q| self.weights[q] * g(q))
    }

    /// Maps every sample point, frame and attached vector through `map`.
    pub fn mapped(&self, map: &dyn AmbientMap) -> Result<LevelSamples> {
        let n = self.ambient_dim;
        let (d, m) = (self.dim, self.n_attached);
        let per = par::try_map_range(self.len(), |q| {
            let mut vs: Vec<Vec<f64>> = self.frame(q).iter().map(|v| v.to_vec()).collect();
            vs.extend((0..m).map(|k| self.attached(q, k).to_vec()));
            let (y, ys) = if vs.is_empty() { (map.apply(self.point(q))?, Vec::new()) } else { map.apply_with_tangents(self.point(q), &vs)? };
            Ok((y, ys))
        })?;
        let mut out = self.clone();
        for (q, (y, ys)) in per.into_iter().enumerate() {
            out.points[q * n..(q + 1) * n].copy_from_slice(&y);
            for a in 0..d {
                let base = (q * d + a) * n;
                out.frames[base..base + n].copy_from_slice(&ys[a]);
            }
            for k in 0..m {
                let base = (q * m + k) * n;
                out.attached[base..base + n].copy_from_slice(&ys[d + k]);
            }
        }
        Ok(out)
    }

    fn attach(&mut self, field: &VectorField) {
        let n = self.ambient_dim;
        let m = self.n_attached;
        let vals = par::map_range(self.len(), |q| field.eval(self.point(q)));
        let mut attached = Vec::with_capacity(self.len() * (m + 1) * n);
        for (q, v) in vals.iter().enumerate() {
            attached.extend_from_slice(&self.attached[q * m * n..(q + 1) * m * n]);
            attached.extend_from_slice(v);
        }
        self.attached = attached;
        self.n_attached += 1;
    }

    /// Reorders attached slots so slot `k` holds the `k`-th requested field.
    fn permute_attached(&mut self, order: &[usize]) {
        let n = self.ambient_dim;
        let m = self.n_attached;
        let mut out = vec![0.0; self.attached.len()];
        for q in 0..self.len() {
            for (slot, &src) in order.iter().enumerate() {
                let (a, b) = ((q * m + slot) * n, (q * m + src) * n);
                out[a..a + n].copy_from_slice(&self.attached[b..b + n]);
            }
        }
        self.attached = out;
    }
}

/// Quadrature samples of level `i`. Each attachment `(X, stage)` is a field
/// defined on the flag as it was after `stage` ambient maps; on curved flags
/// it is evaluated there and pushed forward through the later maps, otherwise
/// it must belong to the current generation.
pub fn sample_level(flag: &FlagEmbedding, level: usize, attach: &[(&VectorField, usize)]) -> Result<LevelSamples> {
    flag.check_level(level)?;
    let mesh = flag.level(level);
    let d = mesh.intrinsic_dim();
    let n = flag.ambient().dim();
    let rule = reference_rule(flag, d)?;
    let curved = flag.is_curved();
    let realization = flag.realization();
    let top_index = flag.top_index(level);

    let cells = par::map_range(mesh.cells().len(), |c| {
        let cell = &mesh.cells()[c];
        let sign = mesh.cell_sign(c);
        let mut s = CellSamples {
            points: Vec::with_capacity(rule.len() * n),
            frames: Vec::with_capacity(rule.len() * d * n),
            weights: Vec::with_capacity(rule.len()),
            bary: Vec::with_capacity(rule.len()),
        };
        if curved {
            let chart = &realization.unwrap().chart;
            let p0 = flag.vertex_param(level, cell[0]).unwrap();
            let edges: Vec<Vec<f64>> =
                cell[1..].iter().map(|&v| chart.param_displacement(p0, flag.vertex_param(level, v).unwrap())).collect();
            for (l, w) in &rule {
                let sp: Vec<f64> = (0..p0.len()).map(|k| p0[k] + (0..d).map(|a| l[a + 1] * edges[a][k]).sum::<f64>()).collect();
                let (x, fr) = chart.eval_with_tangents(&sp, &edges);
                s.points.extend_from_slice(&x);
                for f in fr {
                    s.frames.extend_from_slice(&f);
                }
                s.weights.push(w * sign);
                s.bary.push(*l);
            }
        } else {
            let x0 = &flag.positions()[top_index[cell[0]]];
            let edges: Vec<Vec<f64>> =
                cell[1..].iter().map(|&v| flag.ambient().displacement(x0, &flag.positions()[top_index[v]])).collect();
            for (l, w) in &rule {
                for k in 0..n {
                    s.points.push(x0[k] + (0..d).map(|a| l[a + 1] * edges[a][k]).sum::<f64>());
                }
                for e in &edges {
                    s.frames.extend_from_slice(e);
                }
                s.weights.push(w * sign);
                s.bary.push(*l);
            }
        }
        s
    });

    let total: usize = cells.iter().map(|c| c.weights.len()).sum();
    let mut out = LevelSamples {
        dim: d,
        ambient_dim: n,
        points: Vec::with_capacity(total * n),
        frames: Vec::with_capacity(total * d * n),
        weights: Vec::with_capacity(total),
        cells: Vec::with_capacity(total),
        bary: Vec::with_capacity(total),
        n_attached: 0,
        attached: Vec::new(),
    };
    for (c, s) in cells.into_iter().enumerate() {
        out.cells.extend(std::iter::repeat_n(c, s.weights.len()));
        out.points.extend(s.points);
        out.frames.extend(s.frames);
        out.weights.extend(s.weights);
        out.bary.extend(s.bary);
    }

    let mut order = Vec::with_capacity(attach.len());
    if curved {
        let maps: &[Arc<dyn AmbientMap>] = &realization.unwrap().maps;
        if let Some((_, st)) = attach.iter().find(|(_, st)| *st > maps.len()) {
            return Err(Error::InvalidArgument(format!("tangent stage {st} is ahead of the flag ({} maps)", maps.len())));
        }
        for stage in 0..=maps.len() {
            for (k, (field, st)) in attach.iter().enumerate() {
                if *st == stage {
                    out.attach(field);
                    order.push(k);
                }
            }
            if stage < maps.len() {
                out = out.mapped(maps[stage].as_ref())?;
            }
        }
    } else {
        for (k, (field, st)) in attach.iter().enumerate() {
            if *st != flag.generation() {
                return Err(Error::Unsupported("transported generator on a flag without an analytic chart".into()));
            }
            out.attach(field);
            order.push(k);
        }
    }
    // order[slot] = requested index; invert to put requested k into slot k
    let mut inv = vec![0; order.len()];
    for (slot, &k) in order.iter().enumerate() {
        inv[k] = slot;
    }
    if inv.iter().enumerate().any(|(a, &b)| a != b) {
        out.permute_attached(&inv);
    }
    Ok(out)
}

/// `int_{N_i} alpha`, orientation-signed.
pub fn integrate_over_level(flag: &FlagEmbedding, level: usize, form: &FormField) -> Result<f64> {
    flag.check_level(level)?;
    let d = flag.level(level).intrinsic_dim();
    if form.degree() != d {
        return Err(Error::DegreeMismatch { expected: d, got: form.degree() });
    }
    sample_level(flag, level, &[])?.integrate(form)
}

/// Integrals of `alpha` over each connected component with the stored cell
/// orientation (component signs ignored).
pub fn integrate_by_component(flag: &FlagEmbedding, level: usize, form: &FormField) -> Result<Vec<f64>> {
    let samples = sample_level(flag, level, &[])?;
    if form.degree() != samples.dim {
        return Err(Error::DegreeMismatch { expected: samples.dim, got: form.degree() });
    }
    let mesh = flag.level(level);
    let vals = par::map_range(samples.len(), |q| samples.weights[q] * form.eval(samples.point(q), &samples.frame(q)));
    let mut out = vec![0.0; mesh.n_components()];
    for (q, v) in vals.into_iter().enumerate() {
        let c = samples.cells[q];
        out[mesh.cell_component(c)] += v * mesh.cell_sign(c);
    }
    Ok(out)
}
