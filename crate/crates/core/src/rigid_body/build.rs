use std::sync::Arc;

use super::model::{
    impact_reset, impact_reset_jacobian, mode_dynamics, solve_mode, ContactMode, RigidBodyModel,
};
use crate::error::{Error, Result};
use crate::hybrid::{GuardSpec, HybridSystem, ResetSpec, VectorFieldSpec};
use crate::linalg::{fd_scalar_derivative, Matrix, Vector};

fn nan(n: usize) -> Vector {
    Vector::from_element(n, f64::NAN)
}

/// Normal force in a constrained mode, NaN when the solve fails.
pub(crate) fn normal_force(model: &RigidBodyModel, mode: ContactMode, t: f64, x: &Vector) -> f64 {
    solve_mode(model, mode, t, x).map_or(f64::NAN, |s| s.normal)
}

/// Friction-cone guard `mu_s |f_n| - |f_t|` evaluated with sticking forces.
pub fn cone_guard(model: &RigidBodyModel, t: f64, x: &Vector) -> f64 {
    match solve_mode(model, ContactMode::C, t, x) {
        Ok(s) => model.mu_s * s.normal.abs() - s.tangential.norm(),
        Err(_) => f64::NAN,
    }
}

/// Signed tangential velocity guard for slip-stick.
pub fn slip_guard(model: &RigidBodyModel, x: &Vector) -> f64 {
    let m = model.dof;
    let q = x.rows(0, m).into_owned();
    let qd = x.rows(m, m).into_owned();
    let s = model.slide_direction.unwrap_or(1.0);
    s * ((model.tangent_jacobian)(&q) * qd)[0]
}

/// Rate of change of the gap, `J_n qdot + D_t g_n`.
pub fn approach_rate(model: &RigidBodyModel, t: f64, x: &Vector) -> f64 {
    let m = model.dof;
    let q = x.rows(0, m).into_owned();
    let qd = x.rows(m, m).into_owned();
    let dt = fd_scalar_derivative(|s| (model.gap)(s, &q), t);
    ((model.normal_jacobian)(&q) * qd)[0] + dt
}

/// Hybrid system over the four contact modes. Mode ids follow
/// [`ContactMode::id`]; which transitions exist depends on restitution and
/// friction.
pub fn build_hybrid_system(model: &RigidBodyModel) -> Result<HybridSystem> {
    let issues = model.check_parameters();
    if !issues.is_empty() {
        return Err(Error::InvalidParameter(issues.join("; ")));
    }
    let q0 = Vector::zeros(model.dof);
    let dof = model.dof;
    let n = 2 * dof;
    let model = Arc::new(model.clone());
    let mut sys = HybridSystem::new();
    for mode in ContactMode::ALL {
        let m = model.clone();
        sys.add_mode(
            mode.name(),
            VectorFieldSpec::new(n, move |t, x| {
                mode_dynamics(&m, mode, t, x).unwrap_or_else(|_| nan(n))
            }),
        );
    }

    let impact_guard = {
        let (m1, m2) = (model.clone(), model.clone());
        GuardSpec::new(move |t, x| (m1.gap)(t, &x.rows(0, m1.dof).into_owned())).with_gradient(
            move |_, x| {
                let jn = (m2.normal_jacobian)(&x.rows(0, m2.dof).into_owned());
                let mut g = Vector::zeros(2 * m2.dof);
                g.rows_mut(0, m2.dof).copy_from(&jn.row(0).transpose());
                g
            },
        )
    };
    let impact = |target: ContactMode| {
        let (m1, m2) = (model.clone(), model.clone());
        ResetSpec::new(move |_, x| impact_reset(&m1, target, x).unwrap_or_else(|_| nan(n)))
            .with_jacobian(move |_, x| {
                impact_reset_jacobian(&m2, target, x)
                    .unwrap_or_else(|_| Matrix::from_element(n, n, f64::NAN))
            })
            .time_invariant(n)
    };
    let liftoff = |mode: ContactMode| {
        let m = model.clone();
        GuardSpec::new(move |t, x| normal_force(&m, mode, t, x))
    };
    let apex = {
        let m = model.clone();
        GuardSpec::new(move |t, x| approach_rate(&m, t, x))
    };

    let (u, v, s, c) = (
        ContactMode::U.id(),
        ContactMode::V.id(),
        ContactMode::S.id(),
        ContactMode::C.id(),
    );
    let target = model.impact_target();
    sys.add_transition(
        format!("(U,{})", target.name()),
        u,
        target.id(),
        impact_guard,
        impact(target),
    );
    sys.add_transition("(V,U)", v, u, apex, ResetSpec::identity(n));
    if target == ContactMode::V {
        return Ok(sys);
    }

    let friction = model.has_finite_friction();
    if friction {
        if (model.tangent_jacobian)(&q0).nrows() != 1 {
            return Err(Error::InvalidParameter(
                "stick-slip transitions need exactly one tangent direction".into(),
            ));
        }
        if model.slide_direction.is_none() {
            return Err(Error::InvalidParameter(
                "stick-slip transitions need a slide direction".into(),
            ));
        }
    }
    if target == ContactMode::S || friction {
        sys.add_transition("(S,V)", s, v, liftoff(ContactMode::S), ResetSpec::identity(n));
    }
    if target == ContactMode::C || friction {
        sys.add_transition("(C,V)", c, v, liftoff(ContactMode::C), ResetSpec::identity(n));
    }
    if friction {
        let m1 = model.clone();
        sys.add_transition(
            "(C,S)",
            c,
            s,
            GuardSpec::new(move |t, x| cone_guard(&m1, t, x)),
            ResetSpec::identity(n),
        );
        let m2 = model.clone();
        sys.add_transition(
            "(S,C)",
            s,
            c,
            GuardSpec::new(move |_, x| slip_guard(&m2, x)).time_invariant(),
            ResetSpec::identity(n),
        );
    }
    Ok(sys)
}
