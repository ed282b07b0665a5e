use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hybrid::HybridSystem;
use crate::linalg::{Matrix, Vector};
use crate::rigid_body::{build_hybrid_system, ContactMode, InputFn, RigidBodyModel};

/// Planar two-link arm pinned at height `base` with point masses at the
/// elbow and tip. Contact is between the tip and the ground.
#[derive(Debug, Clone, Copy)]
pub struct TwoLinkParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub a_g: f64,
    pub base: f64,
    pub e: f64,
}

impl Default for TwoLinkParams {
    fn default() -> Self {
        TwoLinkParams {
            m1: 1.0,
            m2: 0.5,
            l1: 1.0,
            l2: 0.8,
            a_g: 9.81,
            base: 0.5,
            e: 0.0,
        }
    }
}

pub fn two_link_arm(p: &TwoLinkParams) -> Result<(RigidBodyModel, HybridSystem)> {
    if !(p.m1 > 0.0 && p.m2 > 0.0 && p.l1 > 0.0 && p.l2 > 0.0) {
        return Err(Error::InvalidParameter("masses and lengths must be positive".into()));
    }
    let TwoLinkParams {
        m1,
        m2,
        l1,
        l2,
        a_g,
        base,
        e,
    } = *p;
    let model = RigidBodyModel::new(
        2,
        move |q| {
            let c2 = q[1].cos();
            let m11 = m1 * l1 * l1 + m2 * (l1 * l1 + l2 * l2 + 2.0 * l1 * l2 * c2);
            let m12 = m2 * (l2 * l2 + l1 * l2 * c2);
            Matrix::from_row_slice(2, 2, &[m11, m12, m12, m2 * l2 * l2])
        },
        move |_, q| base + l1 * q[0].sin() + l2 * (q[0] + q[1]).sin(),
        move |q| {
            let c12 = (q[0] + q[1]).cos();
            Matrix::from_row_slice(1, 2, &[l1 * q[0].cos() + l2 * c12, l2 * c12])
        },
    )
    .with_coriolis(move |q, qd| {
        let h = -m2 * l1 * l2 * q[1].sin();
        Matrix::from_row_slice(2, 2, &[h * qd[1], h * (qd[0] + qd[1]), -h * qd[0], 0.0])
    })
    .with_nonlinear(move |q, _| {
        let c1 = q[0].cos();
        let c12 = (q[0] + q[1]).cos();
        Vector::from_vec(vec![
            (m1 + m2) * a_g * l1 * c1 + m2 * a_g * l2 * c12,
            m2 * a_g * l2 * c12,
        ])
    })
    .with_tangent_jacobian(move |q| {
        let s12 = (q[0] + q[1]).sin();
        Matrix::from_row_slice(1, 2, &[-l1 * q[0].sin() - l2 * s12, -l2 * s12])
    })
    .with_restitution(e);
    let sys = build_hybrid_system(&model)?;
    Ok((model, sys))
}

/// Point mass on a slope with Coulomb friction, pushed down-slope by a
/// force that ramps up from `push_start` and grows with `q1`, which keeps
/// the friction-cone guard state dependent, and slowed by linear viscous
/// drag. The slide direction is fixed to down-slope.
#[derive(Debug, Clone, Copy)]
pub struct CoulombBallParams {
    pub theta: f64,
    pub mass: f64,
    pub a_g: f64,
    pub mu_s: f64,
    pub mu_k: f64,
    pub push_start: f64,
    /// Ramp rate of the push in units of `m a_g` per second.
    pub push_rate: f64,
    /// Viscous drag coefficient in units of `m` per second.
    pub drag: f64,
}

impl Default for CoulombBallParams {
    fn default() -> Self {
        CoulombBallParams {
            theta: 0.3,
            mass: 1.0,
            a_g: 9.81,
            mu_s: 0.6,
            mu_k: 0.5,
            push_start: 1.0,
            push_rate: 1.0,
            drag: 0.5,
        }
    }
}

pub fn coulomb_ball(p: &CoulombBallParams) -> Result<(RigidBodyModel, HybridSystem)> {
    let (s, c) = p.theta.sin_cos();
    let (m, g) = (p.mass, p.a_g);
    let (t0, rate, drag) = (p.push_start, p.push_rate, p.drag);
    // Down-slope is -J_t^T = (c, -s).
    let input: InputFn = Arc::new(move |t, q, qd| {
        let f = m * g * rate * (t - t0).max(0.0) * (1.0 + 0.2 * q[0]);
        Vector::from_vec(vec![f * c, -f * s]) - qd * (m * drag)
    });
    let model = RigidBodyModel::new(
        2,
        move |_| Matrix::identity(2, 2) * m,
        move |_, q| s * q[0] + c * q[1],
        move |_| Matrix::from_row_slice(1, 2, &[s, c]),
    )
    .with_nonlinear(move |_, _| Vector::from_vec(vec![0.0, m * g]))
    .with_tangent_jacobian(move |_| Matrix::from_row_slice(1, 2, &[-c, s]))
    .with_input_fn(input)
    .with_friction(p.mu_s, p.mu_k)
    .with_plastic_target(ContactMode::S)
    .with_slide_direction(-1.0);
    let sys = build_hybrid_system(&model)?;
    Ok((model, sys))
}
