use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How cell geometry is obtained for quadrature.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    /// Curved cells when the flag carries an analytic chart, affine otherwise.
    #[default]
    Auto,
    Affine,
    Curved,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub triangle_degree: usize,
    pub segment_points: usize,
    pub geometry: Geometry,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { triangle_degree: 5, segment_points: 5, geometry: Geometry::Auto }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        triangle_rule(self.triangle_degree)?;
        segment_rule(self.segment_points)?;
        Ok(())
    }
}

/// Barycentric nodes `(l0, l1, l2)` and weights summing to 1.
pub fn triangle_rule(degree: usize) -> Result<Vec<([f64; 3], f64)>> {
    match degree {
        0 | 1 => Ok(vec![([1.0 / 3.0; 3], 1.0)]),
        2 => {
            let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
            Ok(vec![([a, b, b], 1.0 / 3.0), ([b, a, b], 1.0 / 3.0), ([b, b, a], 1.0 / 3.0)])
        }
        3..=5 => {
            let s = 15f64.sqrt();
            let (a1, b1, w1) = ((6.0 - s) / 21.0, (9.0 + 2.0 * s) / 21.0, (155.0 - s) / 1200.0);
            let (a2, b2, w2) = ((6.0 + s) / 21.0, (9.0 - 2.0 * s) / 21.0, (155.0 + s) / 1200.0);
            Ok(vec![
                ([1.0 / 3.0; 3], 9.0 / 40.0),
                ([a1, a1, b1], w1),
                ([a1, b1, a1], w1),
                ([b1, a1, a1], w1),
                ([a2, a2, b2], w2),
                ([a2, b2, a2], w2),
                ([b2, a2, a2], w2),
            ])
        }
        d => Err(Error::InvalidArgument(format!("no triangle rule of degree {d} (supported: 1, 2, 5)"))),
    }
}

/// Gauss-Legendre nodes on `[0, 1]` with weights summing to 1.
pub fn segment_rule(points: usize) -> Result<Vec<(f64, f64)>> {
    let raw: &[(f64, f64)] = match points {
        1 => &[(0.0, 2.0)],
        2 => &[(-0.577_350_269_189_625_8, 1.0), (0.577_350_269_189_625_8, 1.0)],
        3 => &[(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)],
        4 => &[
            (-0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
            (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
        ],
        5 => &[
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.0, 0.568_888_888_888_888_9),
            (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ],
        n => return Err(Error::InvalidArgument(format!("no Gauss-Legendre rule with {n} points (supported: 1-5)"))),
    };
    Ok(raw.iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect())
}
