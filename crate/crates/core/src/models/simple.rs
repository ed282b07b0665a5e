use crate::error::{Error, Result};
use crate::hybrid::{GuardSpec, HybridSystem, ResetSpec, VectorFieldSpec};
use crate::linalg::{Matrix, Vector};

/// Vertical ball on the ground `y = 0` with state `(y, ydot)`. Mode 0 is
/// falling with the impact guard `y`; mode 1 is rising with the apex guard
/// `ydot` and an identity reset back to mode 0.
pub fn bouncing_ball(e: f64, a_g: f64) -> Result<HybridSystem> {
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::InvalidParameter(format!("restitution {e} outside [0, 1]")));
    }
    if !(a_g > 0.0) {
        return Err(Error::InvalidParameter(format!("gravity must be positive, got {a_g}")));
    }
    let field = || {
        VectorFieldSpec::new(2, move |_, x| Vector::from_vec(vec![x[1], -a_g]))
            .with_jacobian(|_, _| Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]))
    };
    let mut sys = HybridSystem::new();
    let fall = sys.add_mode("falling", field());
    let rise = sys.add_mode("rising", field());
    sys.add_transition(
        "impact",
        fall,
        rise,
        GuardSpec::new(|_, x| x[0])
            .with_gradient(|_, _| Vector::from_vec(vec![1.0, 0.0]))
            .time_invariant(),
        ResetSpec::affine(
            Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -e]),
            Vector::zeros(2),
        ),
    );
    sys.add_transition(
        "apex",
        rise,
        fall,
        GuardSpec::new(|_, x| x[1])
            .with_gradient(|_, _| Vector::from_vec(vec![0.0, 1.0]))
            .time_invariant(),
        ResetSpec::identity(2),
    );
    Ok(sys)
}

/// Two modes with constant flows, a linear guard `normal . x + offset` and an
/// identity reset from mode 0 to mode 1.
pub fn constant_flow_two_mode(
    f_i: &Vector,
    f_j: &Vector,
    guard_normal: &Vector,
    offset: f64,
) -> Result<HybridSystem> {
    let n = f_i.len();
    if f_j.len() != n || guard_normal.len() != n {
        return Err(Error::dims("constant flow", n, f_j.len().max(guard_normal.len())));
    }
    if !(guard_normal.dot(f_i) < 0.0) {
        return Err(Error::InvalidParameter(
            "flow in the first mode must approach the guard (normal . f_i < 0)".into(),
        ));
    }
    let constant = |f: &Vector| {
        let (f1, nn) = (f.clone(), f.len());
        VectorFieldSpec::new(nn, move |_, _| f1.clone()).with_jacobian(move |_, _| Matrix::zeros(nn, nn))
    };
    let mut sys = HybridSystem::new();
    let i = sys.add_mode("I", constant(f_i));
    let j = sys.add_mode("J", constant(f_j));
    let (g1, g2) = (guard_normal.clone(), guard_normal.clone());
    sys.add_transition(
        "(I,J)",
        i,
        j,
        GuardSpec::new(move |_, x| g1.dot(x) + offset)
            .with_gradient(move |_, _| g2.clone())
            .time_invariant(),
        ResetSpec::identity(n),
    );
    Ok(sys)
}

/// The constant-flow example with `f_i = (1, -1)`, `f_j = (1, 0)` and guard `x2`.
pub fn constant_flow_example() -> HybridSystem {
    constant_flow_two_mode(
        &Vector::from_vec(vec![1.0, -1.0]),
        &Vector::from_vec(vec![1.0, 0.0]),
        &Vector::from_vec(vec![0.0, 1.0]),
        0.0,
    )
    .expect("example parameters are valid")
}
