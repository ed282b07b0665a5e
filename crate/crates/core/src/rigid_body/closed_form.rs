use super::build::cone_guard;
use super::model::{
    dagger_blocks, impact_velocity_map, jdot_times, mode_dynamics, projection_jacobian, solve_mode,
    ContactMode, RigidBodyModel,
};
use crate::error::{Error, Result};
use crate::hybrid::{EventRecord, SimOptions};
use crate::linalg::{fd_gradient, fd_jacobian, fd_scalar_derivative, Matrix, Vector};

/// Closed-form saltation matrix of a rigid-body event, derived per
/// transition type rather than from the generic formula. Impact forms
/// assume a time-invariant gap function.
pub fn closed_form_saltation(
    model: &RigidBodyModel,
    event: &EventRecord,
    opts: &SimOptions,
) -> Result<Matrix> {
    let from = ContactMode::from_id(event.from)
        .ok_or_else(|| Error::InvalidParameter(format!("mode {} is not a contact mode", event.from)))?;
    let to = ContactMode::from_id(event.to)
        .ok_or_else(|| Error::InvalidParameter(format!("mode {} is not a contact mode", event.to)))?;
    closed_form(model, from, to, event.transition, event.t_event, &event.x_minus, opts)
}

pub fn closed_form(
    model: &RigidBodyModel,
    from: ContactMode,
    to: ContactMode,
    transition: usize,
    t: f64,
    x_minus: &Vector,
    opts: &SimOptions,
) -> Result<Matrix> {
    use ContactMode::*;
    let n = 2 * model.dof;
    if x_minus.len() != n {
        return Err(Error::dims("rigid-body state", n, x_minus.len()));
    }
    match (from, to) {
        (V, U) | (C, V) | (S, V) => Ok(Matrix::identity(n, n)),
        (U, V) | (U, S) | (U, C) => impact(model, to, transition, t, x_minus, opts),
        (C, S) if model.mu_s == model.mu_k => Ok(Matrix::identity(n, n)),
        (C, S) => stick_slip(model, transition, t, x_minus, opts),
        (S, C) => slip_stick(model, transition, t, x_minus, opts),
        _ => Err(Error::InvalidParameter(format!(
            "no closed form for transition ({}, {})",
            from.name(),
            to.name()
        ))),
    }
}

fn blocks(ul: &Matrix, ll: &Matrix, lr: &Matrix) -> Matrix {
    let m = ul.nrows();
    let mut xi = Matrix::zeros(2 * m, 2 * m);
    xi.view_mut((0, 0), (m, m)).copy_from(ul);
    xi.view_mut((m, 0), (m, m)).copy_from(ll);
    xi.view_mut((m, m), (m, m)).copy_from(lr);
    xi
}

fn impact(
    model: &RigidBodyModel,
    target: ContactMode,
    transition: usize,
    t: f64,
    x: &Vector,
    opts: &SimOptions,
) -> Result<Matrix> {
    let dof = model.dof;
    let q = x.rows(0, dof).into_owned();
    let qd = x.rows(dof, dof).into_owned();
    if fd_scalar_derivative(|s| (model.gap)(s, &q), t).abs() > 1e-12 {
        return Err(Error::InvalidParameter(
            "closed-form impact saltation assumes a time-invariant gap".into(),
        ));
    }
    let jn = (model.normal_jacobian)(&q);
    let den = (&jn * &qd)[0];
    if !(den < -opts.eps_trans) {
        return Err(Error::TangentialEvent {
            transition,
            t,
            rate: den,
        });
    }
    let m = (model.mass)(&q);
    let b = impact_velocity_map(model, target, &q)?;
    let qd_p = &b * &qd;
    let dqb = projection_jacobian(model, target, &q, &qd)?;

    let c_m = (model.coriolis)(&q, &qd);
    let c_p = (model.coriolis)(&q, &qd_p);
    let ups_m = (model.input)(t, &q, &qd);
    let ups_p = (model.input)(t, &q, &qd_p);
    let n_m = (model.nonlinear)(&q, &qd);
    let mut n_p = (model.nonlinear)(&q, &qd_p);
    let dq_term = &dqb * &qd;
    let identity = Matrix::identity(dof, dof);

    let (ul, z) = match target {
        ContactMode::V => {
            let d = dagger_blocks(&m, &jn)?;
            let e = model.restitution;
            let bracket = &d.m_inv * (&c_m * &qd - &c_p * &qd_p) - &dq_term;
            let pre_acc = &d.m_inv * (&ups_m - &c_m * &qd - &n_m);
            let extra = &d.m_inv * ((&ups_p - &ups_m) - (&n_p - &n_m));
            let col = bracket + d.j_dag.transpose() * &jn * pre_acc * (1.0 + e) + extra;
            (&d.m_dag * &m - d.j_dag.transpose() * &jn * e, col * &jn / den)
        }
        ContactMode::S | ContactMode::C => {
            let j = model.constraint_jacobian(target, &q);
            let d = dagger_blocks(&m, &j)?;
            let jm = |y: &Vector| model.constraint_jacobian(target, y);
            let jdot_p = jdot_times(&jm, &q, &qd_p);
            if target == ContactMode::S && model.mu_k > 0.0 {
                let mut xp = x.clone();
                xp.rows_mut(dof, dof).copy_from(&qd_p);
                n_p += solve_mode(model, ContactMode::S, t, &xp)?.friction;
            }
            let col = &d.m_dag * (&c_m * &qd - &c_p * &qd_p + (&ups_p - &ups_m) - (&n_p - &n_m))
                - d.j_dag.transpose() * jdot_p
                - &dq_term;
            let ul = if target == ContactMode::S {
                &d.m_dag * &m
            } else {
                &identity - d.j_dag.transpose() * (&j * &qd) * &jn / den
            };
            (ul, col * &jn / den)
        }
        ContactMode::U => unreachable!("impact target is never U"),
    };
    Ok(blocks(&ul, &(z + dqb), &b))
}

fn stick_slip(
    model: &RigidBodyModel,
    transition: usize,
    t: f64,
    x: &Vector,
    opts: &SimOptions,
) -> Result<Matrix> {
    let n = x.len();
    let f_c = mode_dynamics(model, ContactMode::C, t, x)?;
    let f_s = mode_dynamics(model, ContactMode::S, t, x)?;
    let dxg = fd_gradient(|y| cone_guard(model, t, y), x);
    let dtg = fd_scalar_derivative(|s| cone_guard(model, s, x), t);
    let den = dtg + dxg.dot(&f_c);
    if !(den < -opts.eps_trans) {
        return Err(Error::TangentialEvent {
            transition,
            t,
            rate: den,
        });
    }
    Ok(Matrix::identity(n, n) + (f_s - f_c) * dxg.transpose() / den)
}

fn slip_stick(
    model: &RigidBodyModel,
    transition: usize,
    t: f64,
    x: &Vector,
    opts: &SimOptions,
) -> Result<Matrix> {
    let dof = model.dof;
    let n = 2 * dof;
    let q = x.rows(0, dof).into_owned();
    let qd = x.rows(dof, dof).into_owned();
    let jt = (model.tangent_jacobian)(&q);
    let f_s = mode_dynamics(model, ContactMode::S, t, x)?;
    let f_c = mode_dynamics(model, ContactMode::C, t, x)?;
    let qdd_s = f_s.rows(dof, dof).into_owned();
    let dq = fd_jacobian(|y| (model.tangent_jacobian)(y) * &qd, &q);
    let jt_fn = |y: &Vector| (model.tangent_jacobian)(y);
    let den = jdot_times(&jt_fn, &q, &qd)[0] + (&jt * qdd_s)[0];
    let s = model.slide_direction.unwrap_or(1.0);
    if !(s * den < -opts.eps_trans) {
        return Err(Error::TangentialEvent {
            transition,
            t,
            rate: s * den,
        });
    }
    let mut b = Vector::zeros(n);
    b.rows_mut(0, dof).copy_from(&dq.row(0).transpose());
    b.rows_mut(dof, dof).copy_from(&jt.row(0).transpose());
    Ok(Matrix::identity(n, n) + (f_c - f_s) * b.transpose() / den)
}
