use std::collections::HashMap;

use crate::error::{Error, Result};

/// A closed simplicial mesh of intrinsic dimension 0, 1 or 2.
///
/// Points: every cell is a singleton. Curves: ordered edges. Surfaces:
/// oriented triangles. Orientation is a sign per connected component,
/// relative to the stored cell orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    intrinsic_dim: usize,
    n_vertices: usize,
    params: Option<Vec<Vec<f64>>>,
    cells: Vec<Vec<usize>>,
    cell_component: Vec<usize>,
    signs: Vec<f64>,
}

impl Mesh {
    pub fn new(intrinsic_dim: usize, n_vertices: usize, cells: Vec<Vec<usize>>) -> Result<Self> {
        if intrinsic_dim > 2 {
            return Err(Error::InvalidMesh(format!("intrinsic dimension {intrinsic_dim} is not supported")));
        }
        for (c, cell) in cells.iter().enumerate() {
            if cell.len() != intrinsic_dim + 1 {
                return Err(Error::InvalidMesh(format!("cell {c} has {} vertices, expected {}", cell.len(), intrinsic_dim + 1)));
            }
            if let Some(&v) = cell.iter().find(|&&v| v >= n_vertices) {
                return Err(Error::InvalidMesh(format!("cell {c} references vertex {v} of {n_vertices}")));
            }
        }
        let cell_component = components(n_vertices, &cells);
        let n_comp = cell_component.iter().max().map(|m| m + 1).unwrap_or(0);
        Ok(Mesh { intrinsic_dim, n_vertices, params: None, cells, cell_component, signs: vec![1.0; n_comp] })
    }

    /// A 0-dimensional mesh of `n` points, each its own component.
    pub fn points(n: usize) -> Self {
        Self::new(0, n, (0..n).map(|v| vec![v]).collect()).expect("valid point mesh")
    }

    pub fn with_params(mut self, params: Vec<Vec<f64>>) -> Result<Self> {
        if params.len() != self.n_vertices {
            return Err(Error::InvalidMesh(format!("{} parameter labels for {} vertices", params.len(), self.n_vertices)));
        }
        self.params = Some(params);
        Ok(self)
    }

    pub fn with_signs(mut self, signs: Vec<f64>) -> Result<Self> {
        if signs.len() != self.signs.len() || signs.iter().any(|s| s.abs() != 1.0) {
            return Err(Error::InvalidMesh(format!("expected {} orientation signs of +-1", self.signs.len())));
        }
        self.signs = signs;
        Ok(self)
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn params(&self) -> Option<&[Vec<f64>]> {
        self.params.as_deref()
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn n_components(&self) -> usize {
        self.signs.len()
    }

    pub fn cell_component(&self, cell: usize) -> usize {
        self.cell_component[cell]
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn cell_sign(&self, cell: usize) -> f64 {
        self.signs[self.cell_component[cell]]
    }

    /// Reverses the stored orientation of every cell (the component signs are kept).
    pub fn flipped(&self) -> Mesh {
        let mut m = self.clone();
        for c in &mut m.cells {
            if c.len() >= 2 {
                c.swap(0, 1);
            }
        }
        m
    }

    /// Cells incident to each vertex.
    pub fn vertex_cells(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_vertices];
        for (c, cell) in self.cells.iter().enumerate() {
            for &v in cell {
                out[v].push(c);
            }
        }
        out
    }

    /// Violations of the closed-manifold condition: every codimension-1 face
    /// shared by exactly two cells with opposite induced orientation.
    pub fn closedness_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self.intrinsic_dim {
            0 => {}
            1 => {
                let mut indeg = vec![0usize; self.n_vertices];
                let mut outdeg = vec![0usize; self.n_vertices];
                for e in &self.cells {
                    outdeg[e[0]] += 1;
                    indeg[e[1]] += 1;
                    if e[0] == e[1] {
                        out.push(format!("degenerate edge at vertex {}", e[0]));
                    }
                }
                for v in 0..self.n_vertices {
                    if indeg[v] != outdeg[v] || indeg[v] > 1 {
                        out.push(format!("vertex {v} has in-degree {} and out-degree {}", indeg[v], outdeg[v]));
                    } else if indeg[v] == 0 {
                        out.push(format!("vertex {v} is not on any edge"));
                    }
                }
            }
            _ => {
                let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
                for t in &self.cells {
                    for k in 0..3 {
                        *directed.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
                    }
                }
                let mut keys: Vec<_> = directed.iter().collect();
                keys.sort();
                for (&(a, b), &n) in keys {
                    let back = directed.get(&(b, a)).copied().unwrap_or(0);
                    if n != 1 || back != 1 {
                        out.push(format!("edge ({a}, {b}) appears {n} times, reversed {back} times"));
                    }
                }
                let used = self.vertex_cells();
                for (v, cs) in used.iter().enumerate() {
                    if cs.is_empty() {
                        out.push(format!("vertex {v} is not on any triangle"));
                    }
                }
            }
        }
        out
    }
}

fn components(n: usize, cells: &[Vec<usize>]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for cell in cells {
        for w in cell.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut label = HashMap::new();
    cells
        .iter()
        .map(|cell| {
            let root = find(&mut parent, cell[0]);
            let next = label.len();
            *label.entry(root).or_insert(next)
        })
        .collect()
}

/// A periodic `n_u x n_v` triangulated grid on the parameter torus with the
/// given periods. Each square `(i, j)` is split along the diagonal from
/// `(i, j)` to `(i+1, j+1)`; triangles are counter-clockwise in `(u, v)`.
pub fn torus_grid(n_u: usize, n_v: usize, periods: [f64; 2]) -> Result<Mesh> {
    if n_u < 3 || n_v < 3 {
        return Err(Error::InvalidMesh(format!("torus grid needs at least 3x3 vertices, got {n_u}x{n_v}")));
    }
    let idx = |i: usize, j: usize| (i % n_u) * n_v + (j % n_v);
    let mut cells = Vec::with_capacity(2 * n_u * n_v);
    for i in 0..n_u {
        for j in 0..n_v {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            cells.push(vec![a, b, c]);
            cells.push(vec![a, c, d]);
        }
    }
    let params = (0..n_u * n_v)
        .map(|k| vec![periods[0] * (k / n_v) as f64 / n_u as f64, periods[1] * (k % n_v) as f64 / n_v as f64])
        .collect();
    Mesh::new(2, n_u * n_v, cells)?.with_params(params)
}

/// A closed polygon with `n` vertices on the parameter circle.
pub fn circle_polygon(n: usize, period: f64) -> Result<Mesh> {
    if n < 3 {
        return Err(Error::InvalidMesh(format!("a closed polygon needs at least 3 vertices, got {n}")));
    }
    let cells = (0..n).map(|k| vec![k, (k + 1) % n]).collect();
    let params = (0..n).map(|k| vec![period * k as f64 / n as f64]).collect();
    Mesh::new(1, n, cells)?.with_params(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn torus_grid_is_closed() {
        let m = torus_grid(8, 6, [2.0 * PI; 2]).unwrap();
        assert_eq!(m.cells().len(), 96);
        assert!(m.closedness_violations().is_empty());
        assert_eq!(m.n_components(), 1);
    }

    #[test]
    fn open_meshes_are_reported() {
        let m = Mesh::new(2, 3, vec![vec![0, 1, 2]]).unwrap();
        assert_eq!(m.closedness_violations().len(), 3);
        let c = Mesh::new(1, 3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        assert!(!c.closedness_violations().is_empty());
        assert!(circle_polygon(5, 1.0).unwrap().closedness_violations().is_empty());
    }

    #[test]
    fn out_of_range_cells_are_rejected() {
        assert!(Mesh::new(1, 2, vec![vec![0, 2]]).is_err());
        assert!(Mesh::new(2, 3, vec![vec![0, 1]]).is_err());
    }

    #[test]
    fn points_are_separate_components() {
        let p = Mesh::points(3);
        assert_eq!(p.n_components(), 3);
        let two_loops = Mesh::new(1, 6, vec![vec![0, 1], vec![1, 2], vec![2, 0], vec![3, 4], vec![4, 5], vec![5, 3]]).unwrap();
        assert_eq!(two_loops.n_components(), 2);
    }
}
