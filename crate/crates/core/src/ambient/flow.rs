use super::field::Dynamics;
use super::AmbientSpace;
use crate::error::{Error, Result};
use crate::par;

fn check_finite(t: f64, x: &[f64], v: &[f64]) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { time: t, point: x.to_vec() })
    }
}

fn steps(t: f64, dt: f64) -> (usize, f64) {
    if t == 0.0 {
        return (0, 0.0);
    }
    let n = (t.abs() / dt).ceil().max(1.0) as usize;
    (n, t / n as f64)
}

fn rk4_point<D: Dynamics + ?Sized>(field: &D, t_final: f64, dt: f64, x0: &[f64]) -> Result<Vec<f64>> {
    let (n, h) = steps(t_final, dt);
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut tmp = vec![0.0; dim];
    for s in 0..n {
        let t = s as f64 * h;
        let k1 = field.velocity(t, &x);
        check_finite(t, &x, &k1)?;
        for i in 0..dim {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        let k2 = field.velocity(t + 0.5 * h, &tmp);
        check_finite(t + 0.5 * h, &tmp, &k2)?;
        for i in 0..dim {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        let k3 = field.velocity(t + 0.5 * h, &tmp);
        check_finite(t + 0.5 * h, &tmp, &k3)?;
        for i in 0..dim {
            tmp[i] = x[i] + h * k3[i];
        }
        let k4 = field.velocity(t + h, &tmp);
        check_finite(t + h, &tmp, &k4)?;
        for i in 0..dim {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    check_finite(t_final, x0, &x)?;
    Ok(x)
}

fn check_steps(t_final: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !t_final.is_finite() {
        return Err(Error::InvalidArgument(format!("final time must be finite, got {t_final}")));
    }
    Ok(())
}

/// Classical RK4 for `x' = X_t(x)` on every point, `ceil(t_final / dt)` equal
/// steps. Torus points are wrapped into the fundamental domain.
pub fn flow<D: Dynamics + ?Sized>(ambient: &AmbientSpace, field: &D, t_final: f64, dt: f64, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if t_final < 0.0 {
        return Err(Error::InvalidArgument(format!("final time must be non-negative, got {t_final}")));
    }
    flow_signed(ambient, field, t_final, dt, points)
}

/// As [`flow`], but `t_final` may be negative (backward integration).
pub fn flow_signed<D: Dynamics + ?Sized>(ambient: &AmbientSpace, field: &D, t_final: f64, dt: f64, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_steps(t_final, dt)?;
    par::try_map_range(points.len(), |k| {
        let mut x = rk4_point(field, t_final, dt, &points[k])?;
        ambient.wrap(&mut x);
        Ok(x)
    })
}

/// Flows one point together with tangent vectors (the variational equation
/// `v' = DX_t(x) v`), returning `(Fl(x), DFl(x) v_k)`. The point is not wrapped.
pub fn flow_with_tangents<D: Dynamics + ?Sized>(
    field: &D,
    t_final: f64,
    dt: f64,
    x0: &[f64],
    tangents: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    check_steps(t_final, dt)?;
    let (n, h) = steps(t_final, dt);
    let dim = x0.len();
    let m = tangents.len();
    let mut x = x0.to_vec();
    let mut vs: Vec<Vec<f64>> = tangents.to_vec();
    let apply = |j: &[f64], v: &[f64]| -> Vec<f64> { (0..dim).map(|i| (0..dim).map(|k| j[i * dim + k] * v[k]).sum()).collect() };
    for s in 0..n {
        let t = s as f64 * h;
        let stage = |tt: f64, xx: &[f64], ww: &[Vec<f64>]| -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
            let v = field.velocity(tt, xx);
            check_finite(tt, xx, &v)?;
            let jac = if m > 0 { field.jacobian(tt, xx) } else { Vec::new() };
            Ok((v, ww.iter().map(|w| apply(&jac, w)).collect()))
        };
        let shift = |xx: &[f64], ww: &[Vec<f64>], kx: &[f64], kw: &[Vec<f64>], c: f64| {
            let x2: Vec<f64> = xx.iter().zip(kx).map(|(a, b)| a + c * b).collect();
            let w2: Vec<Vec<f64>> = ww.iter().zip(kw).map(|(w, k)| w.iter().zip(k).map(|(a, b)| a + c * b).collect()).collect();
            (x2, w2)
        };
        let (k1, l1) = stage(t, &x, &vs)?;
        let (x2, w2) = shift(&x, &vs, &k1, &l1, 0.5 * h);
        let (k2, l2) = stage(t + 0.5 * h, &x2, &w2)?;
        let (x3, w3) = shift(&x, &vs, &k2, &l2, 0.5 * h);
        let (k3, l3) = stage(t + 0.5 * h, &x3, &w3)?;
        let (x4, w4) = shift(&x, &vs, &k3, &l3, h);
        let (k4, l4) = stage(t + h, &x4, &w4)?;
        for i in 0..dim {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        for a in 0..m {
            for i in 0..dim {
                vs[a][i] += h / 6.0 * (l1[a][i] + 2.0 * l2[a][i] + 2.0 * l3[a][i] + l4[a][i]);
            }
        }
    }
    check_finite(t_final, x0, &x)?;
    Ok((x, vs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::{hamiltonian_vector_field, FormField, ScalarField, TimeDependentField, VectorField, Wave};
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_and_constant_fields() {
        let a = AmbientSpace::euclidean(4).unwrap();
        let pts = vec![vec![0.1, 0.2, 0.3, 0.4], vec![-1.0, 2.0, 0.0, 5.0]];
        let same = flow(&a, &VectorField::zero(4), 3.0, 0.1, &pts).unwrap();
        assert_eq!(same, pts);
        let moved = flow(&a, &VectorField::constant(vec![1.0, 0.0, 0.0, 0.0]), 1.0, 0.1, &pts).unwrap();
        for (p, q) in pts.iter().zip(&moved) {
            assert_abs_diff_eq!(q[0], p[0] + 1.0, epsilon = 1e-14);
            assert_eq!(&q[1..], &p[1..]);
        }
    }

    #[test]
    fn linear_shear_is_exact() {
        let a = AmbientSpace::euclidean(4).unwrap();
        let mut y1 = ScalarField::coordinate(4, 1);
        y1 = y1.mul(&y1).scale(0.5);
        let x = hamiltonian_vector_field(&a, &FormField::scalar(y1)).unwrap();
        let out = flow(&a, &x, 1.0, 0.1, &[vec![0.0, 1.0, 0.0, 0.0]]).unwrap();
        let expect = [1.0, 1.0, 0.0, 0.0];
        for k in 0..4 {
            assert_abs_diff_eq!(out[0][k], expect[k], epsilon = 1e-10);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        // x' = y, y' = -x on R^2: exact rotation
        let a = AmbientSpace::euclidean(2).unwrap();
        let f = FormField::scalar(ScalarField::coordinate(2, 0).mul(&ScalarField::coordinate(2, 0)).add(&ScalarField::coordinate(2, 1).mul(&ScalarField::coordinate(2, 1))).scale(0.5));
        let x = hamiltonian_vector_field(&a, &f).unwrap();
        let t = 2.0;
        let p = vec![1.0, 0.0];
        let mut errs = Vec::new();
        let dts = [0.2, 0.1, 0.05];
        for dt in dts {
            let q = flow(&a, &x, t, dt, &[p.clone()]).unwrap();
            // X_f = -y d/dx + x d/dy... orbit of (1,0) under rotation
            let exact = [t.cos(), -t.sin()];
            let e0 = ((q[0][0] - exact[0]).powi(2) + (q[0][1] - exact[1]).powi(2)).sqrt();
            let exact2 = [t.cos(), t.sin()];
            let e1 = ((q[0][0] - exact2[0]).powi(2) + (q[0][1] - exact2[1]).powi(2)).sqrt();
            errs.push(e0.min(e1));
        }
        let slope = crate::linalg::log_log_slope(&dts, &errs);
        assert!((slope - 4.0).abs() < 0.3, "slope {slope}");
    }

    #[test]
    fn non_finite_is_reported() {
        let a = AmbientSpace::euclidean(2).unwrap();
        let blow = TimeDependentField::new(2, |_t, x: &[f64]| vec![x[0] * x[0], 0.0]);
        let err = flow(&a, &blow, 10.0, 0.5, &[vec![1.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn torus_points_wrap() {
        let a = AmbientSpace::standard_torus(2).unwrap();
        let out = flow(&a, &VectorField::constant(vec![-1.0, 0.0]), 1.0, 0.25, &[vec![0.5, 0.0]]).unwrap();
        assert_abs_diff_eq!(out[0][0], 2.0 * std::f64::consts::PI - 0.5, epsilon = 1e-12);
    }

    #[test]
    fn tangents_match_finite_difference_of_the_flow() {
        let a = AmbientSpace::euclidean(4).unwrap();
        let f = FormField::scalar(ScalarField::trig(0.6, Wave::Sin, vec![1, 1, 0, 1]).add(&ScalarField::trig(0.4, Wave::Cos, vec![0, 1, 2, 0])));
        let x = hamiltonian_vector_field(&a, &f).unwrap();
        let p = vec![0.2, -0.4, 0.9, 0.1];
        let v = vec![0.3, 1.0, -0.5, 0.2];
        let (q, vs) = flow_with_tangents(&x, 0.7, 0.01, &p, &[v.clone()]).unwrap();
        let s = 1e-6;
        let pp: Vec<f64> = p.iter().zip(&v).map(|(a, b)| a + s * b).collect();
        let pm: Vec<f64> = p.iter().zip(&v).map(|(a, b)| a - s * b).collect();
        let out = flow(&a, &x, 0.7, 0.01, &[pp, pm, p.clone()]).unwrap();
        for k in 0..4 {
            assert_abs_diff_eq!(vs[0][k], (out[0][k] - out[1][k]) / (2.0 * s), epsilon = 1e-7);
            assert_abs_diff_eq!(q[k], out[2][k], epsilon = 1e-14);
        }
        // symplectic: omega preserved to integrator order
        let w = vec![-0.1, 0.4, 0.3, 1.0];
        let (_, ws) = flow_with_tangents(&x, 0.7, 0.01, &p, &[v.clone(), w.clone()]).unwrap();
        assert_abs_diff_eq!(a.omega(&ws[0], &ws[1]), a.omega(&v, &w), epsilon = 1e-8);
    }
}
