//! First-order sensitivity of a hybrid transition.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hybrid::{EventRecord, HybridSystem, ModeId, SimOptions};
use crate::linalg::{is_finite_mat, serde_rows, serde_vec, Matrix, Vector};

#[derive(Debug, Clone, Serialize)]
pub struct SaltationResult {
    pub transition: usize,
    pub from: ModeId,
    pub to: ModeId,
    pub t_event: f64,
    #[serde(with = "serde_rows")]
    pub xi: Matrix,
    #[serde(with = "serde_rows")]
    pub dxr: Matrix,
    /// `D_t g + D_x g F^-`; negative for a transversal crossing.
    pub denom: f64,
    #[serde(with = "serde_vec")]
    pub f_minus: Vector,
    #[serde(with = "serde_vec")]
    pub f_plus: Vector,
    /// Set when the reset is the identity and the flows agree, in which case
    /// `xi` is exactly the identity.
    pub identity_shortcut: bool,
}

const SHORTCUT_TOL: f64 = 1e-9;

/// Saltation matrix
/// `Xi = D_x R + (F^+ - D_x R F^- - D_t R) D_x g / (D_t g + D_x g F^-)`.
pub fn saltation(
    sys: &HybridSystem,
    event: &EventRecord,
    opts: &SimOptions,
) -> Result<SaltationResult> {
    let tr = sys
        .transitions
        .get(event.transition)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown transition {}", event.transition)))?;
    let (t, xm) = (event.t_event, &event.x_minus);
    let (ni, nj) = (sys.dim(tr.from), sys.dim(tr.to));
    if xm.len() != ni {
        return Err(Error::dims("pre-event state", ni, xm.len()));
    }
    let xp = tr.reset.apply(t, xm);
    if xp.len() != nj {
        return Err(Error::dims("post-event state", nj, xp.len()));
    }
    let f_minus = sys.mode(tr.from).field.eval(t, xm);
    let f_plus = sys.mode(tr.to).field.eval(t, &xp);
    let dxr = tr.reset.jacobian(t, xm);
    let dtr = tr.reset.time_derivative(t, xm);
    let dxg = tr.guard.gradient(t, xm);
    let dtg = tr.guard.time_derivative(t, xm);
    if dxr.shape() != (nj, ni) {
        return Err(Error::dims("reset Jacobian rows", nj, dxr.nrows()));
    }
    if f_minus.len() != ni || f_plus.len() != nj {
        return Err(Error::dims("vector field", ni, f_minus.len()));
    }
    if dxg.len() != ni {
        return Err(Error::dims("guard gradient", ni, dxg.len()));
    }
    let denom = dtg + dxg.dot(&f_minus);
    if !(denom < -opts.eps_trans) {
        return Err(Error::TangentialEvent {
            transition: event.transition,
            t,
            rate: denom,
        });
    }

    let identity_shortcut = ni == nj
        && (&dxr - Matrix::identity(ni, ni)).amax() <= SHORTCUT_TOL
        && dtr.amax() <= SHORTCUT_TOL
        && (&f_plus - &f_minus).norm() <= SHORTCUT_TOL * f_minus.norm().max(1.0);
    let xi = if identity_shortcut {
        Matrix::identity(ni, ni)
    } else {
        let num = &f_plus - &dxr * &f_minus - dtr;
        &dxr + (num * dxg.transpose()) / denom
    };
    if !is_finite_mat(&xi) {
        return Err(Error::NonFiniteState {
            mode: tr.from.0,
            t,
        });
    }
    Ok(SaltationResult {
        transition: event.transition,
        from: tr.from,
        to: tr.to,
        t_event: t,
        xi,
        dxr,
        denom,
        f_minus,
        f_plus,
        identity_shortcut,
    })
}

/// Linearized flow across one event: `A_J(dt2) Xi A_I(dt1)`.
pub fn sandwich(a_j: &Matrix, xi: &Matrix, a_i: &Matrix) -> Result<Matrix> {
    if xi.ncols() != a_i.nrows() {
        return Err(Error::dims("saltation columns", a_i.nrows(), xi.ncols()));
    }
    if a_j.ncols() != xi.nrows() {
        return Err(Error::dims("saltation rows", a_j.ncols(), xi.nrows()));
    }
    Ok(a_j * xi * a_i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::{event_at, GuardSpec, ResetSpec, VectorFieldSpec};

    fn constant_pair(fi: [f64; 2], fj: [f64; 2]) -> HybridSystem {
        let mut sys = HybridSystem::new();
        let vi = Vector::from_row_slice(&fi);
        let vj = Vector::from_row_slice(&fj);
        let i = sys.add_mode("I", VectorFieldSpec::new(2, move |_, _| vi.clone()));
        let j = sys.add_mode("J", VectorFieldSpec::new(2, move |_, _| vj.clone()));
        sys.add_transition(
            "IJ",
            i,
            j,
            GuardSpec::new(|_, x| x[1])
                .with_gradient(|_, _| Vector::from_vec(vec![0.0, 1.0]))
                .time_invariant(),
            ResetSpec::identity(2),
        );
        sys
    }

    #[test]
    fn flow_change_across_flat_guard() {
        let sys = constant_pair([1.0, -1.0], [1.0, 0.0]);
        let ev = event_at(&sys, 0, 0.0, &Vector::from_vec(vec![0.0, 0.0]));
        let s = saltation(&sys, &ev, &SimOptions::default()).unwrap();
        let expected = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((s.xi - expected).amax() < 1e-15);
        assert!(!s.identity_shortcut);
    }

    #[test]
    fn identity_condition_gives_identity() {
        let sys = constant_pair([1.0, -1.0], [1.0, -1.0]);
        let ev = event_at(&sys, 0, 0.0, &Vector::from_vec(vec![0.3, 0.0]));
        let s = saltation(&sys, &ev, &SimOptions::default()).unwrap();
        assert!(s.identity_shortcut);
        assert_eq!(s.xi, Matrix::identity(2, 2));
    }

    #[test]
    fn tangential_is_rejected() {
        let sys = constant_pair([1.0, 0.0], [1.0, 0.0]);
        let ev = event_at(&sys, 0, 0.0, &Vector::from_vec(vec![0.0, 0.0]));
        assert!(matches!(
            saltation(&sys, &ev, &SimOptions::default()),
            Err(Error::TangentialEvent { .. })
        ));
    }

    #[test]
    fn sandwich_checks_dimensions() {
        let a = Matrix::identity(2, 2);
        let xi = Matrix::zeros(3, 2);
        assert!(sandwich(&a, &xi, &a).is_err());
        assert!(sandwich(&Matrix::identity(3, 3), &xi, &a).is_ok());
    }
}
