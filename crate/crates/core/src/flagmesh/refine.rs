use std::collections::HashMap;

use super::flag::FlagEmbedding;
use super::mesh::Mesh;
use crate::error::{Error, Result};
use crate::linalg;

struct Builder<'a> {
    flag: &'a FlagEmbedding,
    factor: usize,
    params: Vec<Vec<f64>>,
    positions: Vec<Vec<f64>>,
    edge_points: HashMap<(usize, usize), Vec<usize>>,
    has_params: bool,
}

impl Builder<'_> {
    /// New vertex at the affine combination `x_a + sum_k c_k (x_k - x_a)` of top vertices.
    fn new_vertex(&mut self, base: usize, others: &[(usize, f64)]) -> usize {
        let top = self.flag.top();
        let pos = self.flag.positions();
        let x0 = &pos[base];
        let mut x = x0.clone();
        for &(v, c) in others {
            linalg::axpy(&mut x, c, &self.flag.ambient().displacement(x0, &pos[v]));
        }
        if self.has_params {
            let p0 = self.flag.vertex_param(top, base).unwrap().to_vec();
            let mut p = p0.clone();
            let periods = self.flag.realization().map(|r| r.chart.param_periods().to_vec());
            for &(v, c) in others {
                let pv = self.flag.vertex_param(top, v).unwrap();
                let d: Vec<f64> = match &periods {
                    Some(per) => p0.iter().zip(pv).zip(per).map(|((a, b), t)| {
                        let d = b - a;
                        d - t * (d / t).round()
                    }).collect(),
                    None => linalg::sub(pv, &p0),
                };
                linalg::axpy(&mut p, c, &d);
            }
            if let Some(per) = &periods {
                for (pi, t) in p.iter_mut().zip(per) {
                    *pi = pi.rem_euclid(*t);
                }
            }
            self.params.push(p);
        }
        self.flag.ambient().wrap(&mut x);
        self.positions.push(x);
        self.positions.len() - 1
    }

    /// Vertices along the edge `a -> b` at `k/factor`, `k = 0..=factor`.
    fn edge(&mut self, a: usize, b: usize) -> Vec<usize> {
        let (lo, hi) = (a.min(b), a.max(b));
        if !self.edge_points.contains_key(&(lo, hi)) {
            let f = self.factor;
            let mut pts = vec![lo];
            for k in 1..f {
                pts.push(self.new_vertex(lo, &[(hi, k as f64 / f as f64)]));
            }
            pts.push(hi);
            self.edge_points.insert((lo, hi), pts);
        }
        let pts = &self.edge_points[&(lo, hi)];
        if a == lo {
            pts.clone()
        } else {
            pts.iter().rev().copied().collect()
        }
    }
}

/// Uniform subdivision of every edge into `factor` pieces (curves) or every
/// triangle into `factor^2` similar triangles. New positions come from the
/// realization when present, else from affine interpolation. Lower levels
/// are carried along.
pub fn refine(flag: &FlagEmbedding, factor: usize) -> Result<FlagEmbedding> {
    if factor == 0 {
        return Err(Error::InvalidArgument("refinement factor must be positive".into()));
    }
    if factor == 1 {
        return Ok(flag.clone());
    }
    let top = flag.top();
    let mesh = flag.level(top);
    let d = mesh.intrinsic_dim();
    if d == 0 {
        return Err(Error::Unsupported("cannot refine a flag whose top level is 0-dimensional".into()));
    }
    let has_params = mesh.params().is_some();
    let mut b = Builder {
        flag,
        factor,
        params: mesh.params().map(|p| p.to_vec()).unwrap_or_default(),
        positions: flag.positions().to_vec(),
        edge_points: HashMap::new(),
        has_params,
    };
    let mut cells = Vec::new();
    for cell in mesh.cells() {
        if d == 1 {
            let pts = b.edge(cell[0], cell[1]);
            cells.extend(pts.windows(2).map(|w| vec![w[0], w[1]]));
            continue;
        }
        let (a0, a1, a2) = (cell[0], cell[1], cell[2]);
        let e01 = b.edge(a0, a1);
        let e02 = b.edge(a0, a2);
        let e12 = b.edge(a1, a2);
        // lattice (i, j) -> a0 + i/f (a1 - a0) + j/f (a2 - a0)
        let mut grid = HashMap::new();
        for i in 0..=factor {
            for j in 0..=factor - i {
                let v = if j == 0 {
                    e01[i]
                } else if i == 0 {
                    e02[j]
                } else if i + j == factor {
                    e12[j]
                } else {
                    b.new_vertex(a0, &[(a1, i as f64 / factor as f64), (a2, j as f64 / factor as f64)])
                };
                grid.insert((i, j), v);
            }
        }
        for i in 0..factor {
            for j in 0..factor - i {
                cells.push(vec![grid[&(i, j)], grid[&(i + 1, j)], grid[&(i, j + 1)]]);
                if i + j + 1 < factor {
                    cells.push(vec![grid[&(i + 1, j)], grid[&(i + 1, j + 1)], grid[&(i, j + 1)]]);
                }
            }
        }
    }
    let n_new = b.positions.len();
    let mut new_top = Mesh::new(d, n_new, cells)?;
    if has_params {
        new_top = new_top.with_params(b.params.clone())?;
    }
    new_top = new_top.with_signs(mesh.signs().to_vec())?;

    let mut positions = b.positions.clone();
    if let Some(real) = flag.realization() {
        for (k, pos) in positions.iter_mut().enumerate().skip(flag.positions().len()) {
            let (mut x, _) = real.eval_with_tangents(&b.params[k], &[])?;
            flag.ambient().wrap(&mut x);
            *pos = x;
        }
    }

    // lower levels: a curve directly below the top gets its edges split along the shared edge points
    let r = flag.n_levels();
    let mut levels: Vec<Mesh> = flag.levels().to_vec();
    let mut vertex_maps: Vec<Vec<usize>> = flag.inclusions().iter().map(|inc| inc.vertex_map.clone()).collect();
    levels[r - 1] = new_top;
    if r >= 2 && flag.level(r - 2).intrinsic_dim() == 1 {
        let curve = flag.level(r - 2);
        let vm = &flag.inclusions()[r - 2].vertex_map;
        let mut new_vm = vm.clone();
        let mut index: HashMap<usize, usize> = vm.iter().enumerate().map(|(v, &w)| (w, v)).collect();
        let mut cells = Vec::new();
        for e in curve.cells() {
            let pts = b.edge(vm[e[0]], vm[e[1]]);
            let ids: Vec<usize> = pts
                .iter()
                .map(|&w| {
                    *index.entry(w).or_insert_with(|| {
                        new_vm.push(w);
                        new_vm.len() - 1
                    })
                })
                .collect();
            cells.extend(ids.windows(2).map(|w| vec![w[0], w[1]]));
        }
        levels[r - 2] = Mesh::new(1, new_vm.len(), cells)?.with_signs(curve.signs().to_vec())?;
        vertex_maps[r - 2] = new_vm;
    }
    flag.rebuild(levels, vertex_maps, positions)
}
