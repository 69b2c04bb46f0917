use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::flag::FlagEmbedding;
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Minimum distance between distinct top vertices.
    pub min_vertex_distance: f64,
    /// Minimum length / area of a cell.
    pub min_cell_measure: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { min_vertex_distance: 1e-6, min_cell_measure: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    Structural,
    Closedness,
    Regularity,
    Orientation,
    Dimension,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub level: Option<usize>,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, level: Option<usize>, message: String) {
        self.violations.push(Violation { kind, level, message });
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

/// Checks every invariant of a flag embedding; an empty report means valid.
pub fn validate_flag(flag: &FlagEmbedding, thresholds: &Thresholds) -> ValidationReport {
    let mut report = ValidationReport::default();
    for msg in flag.structural_problems() {
        report.push(ViolationKind::Structural, None, msg.clone());
    }
    for (i, mesh) in flag.levels().iter().enumerate() {
        for msg in mesh.closedness_violations() {
            report.push(ViolationKind::Closedness, Some(i), msg);
        }
        if mesh.signs().iter().any(|s| s.abs() != 1.0) {
            report.push(ViolationKind::Orientation, Some(i), "orientation signs must be +-1".into());
        }
        if flag.is_symplectic_mode() && mesh.intrinsic_dim() % 2 != 0 {
            report.push(
                ViolationKind::Dimension,
                Some(i),
                format!("symplectic mode requires even-dimensional levels (level {i} has dimension {})", mesh.intrinsic_dim()),
            );
        }
    }
    let top = flag.top();
    let mesh = flag.level(top);
    for (c, cell) in mesh.cells().iter().enumerate() {
        if cell.len() < 2 {
            continue;
        }
        let x0 = &flag.positions()[cell[0]];
        let edges: Vec<Vec<f64>> = cell[1..].iter().map(|&v| flag.ambient().displacement(x0, &flag.positions()[v])).collect();
        let measure = match edges.len() {
            1 => linalg::norm(&edges[0]),
            _ => {
                let (a, b) = (&edges[0], &edges[1]);
                let (aa, bb, ab) = (linalg::dot(a, a), linalg::dot(b, b), linalg::dot(a, b));
                0.5 * (aa * bb - ab * ab).max(0.0).sqrt()
            }
        };
        if !(measure > thresholds.min_cell_measure) {
            report.push(ViolationKind::Regularity, Some(top), format!("cell {c} has measure {measure:e}"));
        }
    }
    for (a, b, d) in close_pairs(flag, thresholds.min_vertex_distance) {
        report.push(ViolationKind::Regularity, Some(top), format!("top vertices {a} and {b} are {d:e} apart"));
    }
    report
}

/// Pairs of distinct top vertices closer than `h`, via a hash grid.
fn close_pairs(flag: &FlagEmbedding, h: f64) -> Vec<(usize, usize, f64)> {
    let pos = flag.positions();
    if pos.is_empty() || !(h > 0.0) {
        return Vec::new();
    }
    let n = flag.ambient().dim();
    let periods = flag.ambient().periods().map(|p| p.to_vec());
    let nb: Vec<i64> = match &periods {
        Some(p) => p.iter().map(|per| ((per / h).floor() as i64).max(1)).collect(),
        None => vec![i64::MAX; n],
    };
    let key = |x: &[f64]| -> Vec<i64> {
        (0..n)
            .map(|k| match &periods {
                Some(p) => ((x[k].rem_euclid(p[k]) / p[k] * nb[k] as f64).floor() as i64).min(nb[k] - 1),
                None => (x[k] / h).floor() as i64,
            })
            .collect()
    };
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (v, x) in pos.iter().enumerate() {
        buckets.entry(key(x)).or_default().push(v);
    }
    let mut out = Vec::new();
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(n as u32))
        .map(|mut c| {
            (0..n)
                .map(|_| {
                    let o = (c % 3) as i64 - 1;
                    c /= 3;
                    o
                })
                .collect()
        })
        .collect();
    for (v, x) in pos.iter().enumerate() {
        let k = key(x);
        let mut seen = Vec::new();
        for off in &offsets {
            let nk: Vec<i64> = k
                .iter()
                .zip(off)
                .zip(&nb)
                .map(|((a, o), m)| if periods.is_some() { (a + o).rem_euclid(*m) } else { a + o })
                .collect();
            if seen.contains(&nk) {
                continue;
            }
            if let Some(list) = buckets.get(&nk) {
                for &w in list {
                    if w > v {
                        let d = flag.ambient().distance(x, &pos[w]);
                        if d < h {
                            out.push((v, w, d));
                        }
                    }
                }
            }
            seen.push(nk);
        }
    }
    out.sort_by_key(|a| (a.0, a.1));
    out
}
