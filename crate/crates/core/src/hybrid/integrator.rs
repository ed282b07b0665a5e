//! Fixed-step RK4 on a uniform grid anchored at the segment start.

use super::types::VectorFieldSpec;
use crate::linalg::{Matrix, Vector};

/// Grid time after `k` steps from `t0`, clipped to `t_end`. The last step is
/// truncated rather than leaving a sliver shorter than `1e-9 h`.
pub(crate) fn grid_time(t0: f64, h: f64, k: usize, t_end: f64) -> f64 {
    let t = t0 + (k as f64) * h;
    if t >= t_end - 1e-9 * h {
        t_end
    } else {
        t
    }
}

pub fn rk4_step(field: &VectorFieldSpec, t: f64, x: &Vector, h: f64) -> Vector {
    let k1 = field.eval(t, x);
    let k2 = field.eval(t + 0.5 * h, &(x + &k1 * (0.5 * h)));
    let k3 = field.eval(t + 0.5 * h, &(x + &k2 * (0.5 * h)));
    let k4 = field.eval(t + h, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// One RK4 step of the state together with the variational equation
/// `dM/dt = D_x F(t, x) M`.
pub fn rk4_variational_step(
    field: &VectorFieldSpec,
    t: f64,
    x: &Vector,
    m: &Matrix,
    h: f64,
) -> (Vector, Matrix) {
    let k1 = field.eval(t, x);
    let l1 = field.jacobian(t, x) * m;
    let x2 = x + &k1 * (0.5 * h);
    let m2 = m + &l1 * (0.5 * h);
    let k2 = field.eval(t + 0.5 * h, &x2);
    let l2 = field.jacobian(t + 0.5 * h, &x2) * &m2;
    let x3 = x + &k2 * (0.5 * h);
    let m3 = m + &l2 * (0.5 * h);
    let k3 = field.eval(t + 0.5 * h, &x3);
    let l3 = field.jacobian(t + 0.5 * h, &x3) * &m3;
    let x4 = x + &k3 * h;
    let m4 = m + &l3 * h;
    let k4 = field.eval(t + h, &x4);
    let l4 = field.jacobian(t + h, &x4) * &m4;
    (
        x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0),
        m + (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (h / 6.0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_exact_for_cubic_time_polynomial() {
        // x' = 3 t^2 integrates exactly under RK4.
        let f = VectorFieldSpec::new(1, |t, _| Vector::from_element(1, 3.0 * t * t));
        let x = rk4_step(&f, 0.5, &Vector::from_element(1, 0.0), 0.25);
        let exact = 0.75f64.powi(3) - 0.5f64.powi(3);
        assert!((x[0] - exact).abs() < 1e-15);
    }

    #[test]
    fn variational_step_matches_linear_flow() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let a2 = a.clone();
        let f = VectorFieldSpec::new(2, move |_, x| &a * x).with_jacobian(move |_, _| a2.clone());
        let x0 = Vector::from_vec(vec![1.0, 0.0]);
        let (x1, m1) = rk4_variational_step(&f, 0.0, &x0, &Matrix::identity(2, 2), 0.01);
        assert!((&m1 * &x0 - &x1).norm() < 1e-15);
    }

    #[test]
    fn grid_time_truncates_last_step() {
        assert_eq!(grid_time(0.0, 0.3, 3, 0.95), 0.8999999999999999);
        assert_eq!(grid_time(0.0, 0.3, 4, 0.95), 0.95);
        assert_eq!(grid_time(0.0, 0.25, 4, 1.0), 1.0);
    }
}
