use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hybrid::{GuardSpec, HybridSystem, ResetSpec, VectorFieldSpec};
use crate::linalg::{Matrix, Vector};
use crate::rigid_body::{ContactMode, InputFn, RigidBodyModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BallFriction {
    /// Plastic impact into frictionless sliding.
    FrictionlessSlide,
    /// Plastic impact into sticking.
    InfiniteStick,
}

/// Point mass dropped onto the plane `sin(theta) q1 + cos(theta) q2 = 0`.
#[derive(Clone)]
pub struct BallDropParams {
    pub theta: f64,
    pub mass: f64,
    pub a_g: f64,
    pub friction: BallFriction,
    pub e: f64,
    /// Planar force `(u1, u2)` as a function of `(t, q, qdot)`.
    pub input: Option<InputFn>,
}

impl Default for BallDropParams {
    fn default() -> Self {
        BallDropParams {
            theta: 0.3,
            mass: 1.0,
            a_g: 9.81,
            friction: BallFriction::FrictionlessSlide,
            e: 0.0,
            input: None,
        }
    }
}

impl BallDropParams {
    pub fn with_input(mut self, u: InputFn) -> Self {
        self.input = Some(u);
        self
    }

    fn validate(&self) -> Result<()> {
        let half_pi = std::f64::consts::FRAC_PI_2;
        if !(self.theta > -half_pi && self.theta < half_pi) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in (-pi/2, pi/2), got {}",
                self.theta
            )));
        }
        if !(self.mass > 0.0) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {}", self.mass)));
        }
        if !(self.a_g >= 0.0) || !self.a_g.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid gravity {}", self.a_g)));
        }
        if !(0.0..=1.0).contains(&self.e) {
            return Err(Error::InvalidParameter(format!("restitution {} outside [0, 1]", self.e)));
        }
        Ok(())
    }
}

/// Vertical thrust pulse `u2 = m a_g A exp(-((t - t_c)/w)^2) (1 + kappa q2)`
/// with `A = 1.5`, `t_c = 1`, `w = 0.3`, `kappa = 0.1`. It briefly exceeds
/// gravity, so a resting ball lifts off; the height dependence keeps the
/// liftoff guard state dependent.
pub fn thrust_pulse(mass: f64, a_g: f64) -> InputFn {
    Arc::new(move |t, q, _| {
        let s = (t - 1.0) / 0.3;
        let u2 = mass * a_g * 1.5 * (-s * s).exp() * (1.0 + 0.1 * q[1]);
        Vector::from_vec(vec![0.0, u2])
    })
}

fn split(x: &Vector) -> (Vector, Vector) {
    (x.rows(0, 2).into_owned(), x.rows(2, 2).into_owned())
}

fn state(q: &Vector, qd: &Vector) -> Vector {
    Vector::from_vec(vec![q[0], q[1], qd[0], qd[1]])
}

fn block_reset(b: Matrix) -> ResetSpec {
    let (b1, b2) = (b.clone(), b);
    ResetSpec::new(move |_, x| {
        let (q, qd) = split(x);
        state(&q, &(&b1 * qd))
    })
    .with_jacobian(move |_, _| {
        let mut j = Matrix::identity(4, 4);
        j.view_mut((2, 2), (2, 2)).copy_from(&b2);
        j
    })
    .time_invariant(4)
}

/// Generic rigid-body description of the ball drop together with a
/// symbolic hybrid system written directly from the planar equations.
/// Both use mode ids of [`ContactMode`].
pub fn ball_drop(params: &BallDropParams) -> Result<(RigidBodyModel, HybridSystem)> {
    params.validate()?;
    let (s, c) = params.theta.sin_cos();
    let (m, g) = (params.mass, params.a_g);
    let input: InputFn = params
        .input
        .clone()
        .unwrap_or_else(|| Arc::new(|_, _, _| Vector::zeros(2)));

    let mut model = RigidBodyModel::new(
        2,
        move |_| Matrix::identity(2, 2) * m,
        move |_, q| s * q[0] + c * q[1],
        move |_| Matrix::from_row_slice(1, 2, &[s, c]),
    )
    .with_nonlinear(move |_, _| Vector::from_vec(vec![0.0, m * g]))
    .with_tangent_jacobian(move |_| Matrix::from_row_slice(1, 2, &[-c, s]))
    .with_input_fn(input.clone())
    .with_restitution(params.e);
    if params.friction == BallFriction::InfiniteStick {
        model = model
            .with_friction(f64::INFINITY, 0.0)
            .with_plastic_target(ContactMode::C);
    }

    let nvec = Vector::from_vec(vec![s, c]);
    let proj = Matrix::identity(2, 2) - &nvec * nvec.transpose();
    let free_acc = {
        let u = input.clone();
        move |t: f64, q: &Vector, qd: &Vector| u(t, q, qd) / m - Vector::from_vec(vec![0.0, g])
    };
    let normal_force = {
        let u = input.clone();
        move |t: f64, x: &Vector| {
            let (q, qd) = split(x);
            let uu = u(t, &q, &qd);
            c * (m * g - uu[1]) - s * uu[0]
        }
    };

    let mut sys = HybridSystem::new();
    for name in ["U", "V"] {
        let acc = free_acc.clone();
        sys.add_mode(
            name,
            VectorFieldSpec::new(4, move |t, x| {
                let (q, qd) = split(x);
                state(&qd, &acc(t, &q, &qd))
            }),
        );
    }
    {
        let acc = free_acc.clone();
        let p = proj.clone();
        sys.add_mode(
            "S",
            VectorFieldSpec::new(4, move |t, x| {
                let (q, qd) = split(x);
                state(&qd, &(&p * acc(t, &q, &qd)))
            }),
        );
    }
    sys.add_mode(
        "C",
        VectorFieldSpec::new(4, |_, x| Vector::from_vec(vec![x[2], x[3], 0.0, 0.0])),
    );

    let impact_guard = GuardSpec::new(move |_, x| s * x[0] + c * x[1])
        .with_gradient(move |_, _| Vector::from_vec(vec![s, c, 0.0, 0.0]))
        .time_invariant();
    let apex_guard = GuardSpec::new(move |_, x| s * x[2] + c * x[3])
        .with_gradient(move |_, _| Vector::from_vec(vec![0.0, 0.0, s, c]))
        .time_invariant();
    let (u, v, sl, st) = (
        ContactMode::U.id(),
        ContactMode::V.id(),
        ContactMode::S.id(),
        ContactMode::C.id(),
    );
    if params.e > 0.0 {
        let b = Matrix::identity(2, 2) - &nvec * nvec.transpose() * (1.0 + params.e);
        sys.add_transition("(U,V)", u, v, impact_guard, block_reset(b));
        sys.add_transition("(V,U)", v, u, apex_guard, ResetSpec::identity(4));
        return Ok((model, sys));
    }
    let (target, b) = match params.friction {
        BallFriction::FrictionlessSlide => (sl, proj),
        BallFriction::InfiniteStick => (st, Matrix::zeros(2, 2)),
    };
    let tname = if target == sl { "(U,S)" } else { "(U,C)" };
    sys.add_transition(tname, u, target, impact_guard, block_reset(b));
    sys.add_transition("(V,U)", v, u, apex_guard, ResetSpec::identity(4));
    let lname = if target == sl { "(S,V)" } else { "(C,V)" };
    sys.add_transition(lname, target, v, GuardSpec::new(move |t, x| normal_force(t, x)), ResetSpec::identity(4));
    Ok((model, sys))
}

/// Symbolic `Omega` block of the sliding-impact saltation matrix.
pub fn omega_slide(theta: f64) -> Matrix {
    let (s, c) = theta.sin_cos();
    Matrix::from_row_slice(2, 2, &[c * c, -c * s, -c * s, s * s])
}

/// Symbolic `Omega` block of the sticking-impact saltation matrix.
pub fn omega_stick(theta: f64, qd: &Vector) -> Matrix {
    let (s, c) = theta.sin_cos();
    let d = qd[1] * c + qd[0] * s;
    Matrix::from_row_slice(
        2,
        2,
        &[qd[1] * c, -qd[0] * c, -qd[1] * s, qd[0] * s],
    ) / d
}
