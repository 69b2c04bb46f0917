//! Small dense helpers on `&[f64]` vectors.

use nalgebra::{DMatrix, DVector};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Determinant of a square matrix given as rows; exact cofactor expansion up
/// to 3x3, LU beyond.
pub fn det(rows: &[Vec<f64>]) -> f64 {
    match rows.len() {
        0 => 1.0,
        1 => rows[0][0],
        2 => rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0],
        3 => {
            let r = rows;
            r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
                - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
                + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
        }
        n => DMatrix::from_fn(n, n, |i, j| rows[i][j]).determinant(),
    }
}

/// Orthonormal basis of the span of `vectors` in `R^dim`, keeping at most
/// `max_rank` directions (largest singular values first) and dropping those
/// below `rel_tol` times the largest.
pub fn orthonormal_span(vectors: &[Vec<f64>], dim: usize, max_rank: usize, rel_tol: f64) -> Vec<Vec<f64>> {
    if vectors.is_empty() || max_rank == 0 {
        return Vec::new();
    }
    let a = DMatrix::from_fn(dim, vectors.len(), |i, j| vectors[j][i]);
    let svd = a.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let smax = order.first().map(|&i| svd.singular_values[i]).unwrap_or(0.0);
    if smax == 0.0 {
        return Vec::new();
    }
    order
        .into_iter()
        .take(max_rank)
        .filter(|&i| svd.singular_values[i] > rel_tol * smax)
        .map(|i| u.column(i).iter().copied().collect())
        .collect()
}

/// Gram-Schmidt orthonormalisation preserving the input order (used where the
/// first vectors must stay aligned, e.g. analytic tangent frames).
pub fn gram_schmidt(vectors: &[Vec<f64>], rel_tol: f64) -> Vec<Vec<f64>> {
    let scale = vectors.iter().map(|v| norm(v)).fold(0.0, f64::max);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = dot(&w, q);
                axpy(&mut w, -c, q);
            }
        }
        let n = norm(&w);
        if n > rel_tol * scale && n > 0.0 {
            out.push(scale_vec(w, 1.0 / n));
        }
    }
    out
}

fn scale_vec(mut v: Vec<f64>, s: f64) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x *= s);
    v
}

/// Removes the components of `v` along the orthonormal `basis`.
pub fn reject(v: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut w = v.to_vec();
    for q in basis {
        let c = dot(&w, q);
        axpy(&mut w, -c, q);
    }
    w
}

/// Projection of `v` onto the span of the orthonormal `basis`.
pub fn project(v: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut w = vec![0.0; v.len()];
    for q in basis {
        axpy(&mut w, dot(v, q), q);
    }
    w
}

/// Orthonormal basis of the orthogonal complement of the orthonormal `basis`.
pub fn complement(basis: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut candidates: Vec<Vec<f64>> = basis.to_vec();
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        candidates.push(e);
    }
    let full = gram_schmidt(&candidates, 1e-10);
    full.into_iter().skip(basis.len()).take(dim - basis.len()).collect()
}

/// Symmetric positive semidefinite solve with a spectral cutoff: returns the
/// minimum-norm solution of `(M) x = b` restricted to eigenvalues above
/// `rel_cut * max_eig`, plus the number of discarded directions.
pub fn spd_pseudo_solve(m: &DMatrix<f64>, b: &DVector<f64>, rel_cut: f64) -> (DVector<f64>, usize) {
    let eig = m.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let mut x = DVector::zeros(m.ncols());
    let mut dropped = 0;
    for k in 0..eig.eigenvalues.len() {
        let l = eig.eigenvalues[k];
        if lmax == 0.0 || l <= rel_cut * lmax {
            dropped += 1;
            continue;
        }
        let q = eig.eigenvectors.column(k);
        let c = q.dot(b) / l;
        x.axpy(c, &q, 1.0);
    }
    (x, dropped)
}

/// Least-squares slope of `log(values)` against `log(steps)`.
pub fn log_log_slope(steps: &[f64], values: &[f64]) -> f64 {
    let xs: Vec<f64> = steps.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.abs().max(f64::MIN_POSITIVE).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
