use proptest::prelude::*;
use saltlib::hybrid::{event_at, simulate, ModeId};
use saltlib::models::{bouncing_ball, constant_flow_two_mode, two_link_arm, TwoLinkParams};
use saltlib::oracles::{first_order_residual, numeric_saltation};
use saltlib::rigid_body::closed_form_saltation;
use saltlib::saltation::saltation;
use saltlib::{Error, Matrix, SimOptions, Vector};

const G: f64 = 9.81;

fn v(x: &[f64]) -> Vector {
    Vector::from_row_slice(x)
}

#[test]
fn bouncing_ball_matches_hand_derivation() {
    for e in [0.0, 0.3, 0.5, 1.0] {
        let sys = bouncing_ball(e, G).unwrap();
        let traj = simulate(&sys, ModeId(0), &v(&[1.0, 0.0]), (0.0, 0.5), &SimOptions::default()).unwrap();
        let ev = &traj.events[0];
        let vel = ev.x_minus[1];
        let expected = Matrix::from_row_slice(2, 2, &[-e, 0.0, -(1.0 + e) * G / vel, -e]);
        let xi = saltation(&sys, ev, &SimOptions::default()).unwrap().xi;
        assert!((&xi - &expected).amax() < 1e-9, "e = {e}: {xi}");
    }
}

#[test]
fn apex_is_identity_shortcut() {
    let sys = bouncing_ball(0.8, G).unwrap();
    let traj = simulate(&sys, ModeId(0), &v(&[1.0, 0.0]), (0.0, 1.0), &SimOptions::default()).unwrap();
    let apex = traj.events.iter().find(|e| e.transition == 1).unwrap();
    let r = saltation(&sys, apex, &SimOptions::default()).unwrap();
    assert!(r.identity_shortcut);
    assert_eq!(r.xi, Matrix::identity(2, 2));
}

#[test]
fn tangential_event_is_rejected() {
    let sys = bouncing_ball(0.8, G).unwrap();
    // At rest on the ground the impact guard has zero rate.
    let ev = event_at(&sys, 0, 0.0, &v(&[0.0, 0.0]));
    let err = saltation(&sys, &ev, &SimOptions::default()).unwrap_err();
    assert!(matches!(err, Error::TangentialEvent { .. }), "{err}");
}

#[test]
fn two_link_arm_closed_form_matches_generic() {
    let (model, sys) = two_link_arm(&TwoLinkParams::default()).unwrap();
    let opts = SimOptions::default();
    let traj = simulate(&sys, ModeId(0), &v(&[0.3, -0.9, 0.0, 0.0]), (0.0, 0.5), &opts).unwrap();
    assert!(!traj.events.is_empty());
    for ev in &traj.events {
        let generic = saltation(&sys, ev, &opts).unwrap().xi;
        let cf = closed_form_saltation(&model, ev, &opts).unwrap();
        assert!((&generic - &cf).amax() < 1e-6 * generic.amax().max(1.0));
        // Positions never jump.
        assert!(generic.view((0, 2), (2, 2)).amax() < 1e-10);
    }
}

#[test]
fn first_order_prediction_error_is_quadratic() {
    let sys = bouncing_ball(0.8, G).unwrap();
    let opts = SimOptions::default();
    let traj = simulate(&sys, ModeId(0), &v(&[1.0, 0.0]), (0.0, 0.5), &opts).unwrap();
    let ev = &traj.events[0];
    let xi = saltation(&sys, ev, &opts).unwrap().xi;
    let dir = v(&[0.6, -0.8]);
    let r1 = first_order_residual(&sys, ev.from, &ev.x_minus, ev.t_event, &xi, &(&dir * 1e-2), &opts).unwrap();
    let r2 = first_order_residual(&sys, ev.from, &ev.x_minus, ev.t_event, &xi, &(&dir * 5e-3), &opts).unwrap();
    assert!((r1 / r2 - 4.0).abs() < 0.2, "ratio {}", r1 / r2);
}

fn vec2() -> impl Strategy<Value = Vector> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| v(&[a, b]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// For constant flows and an identity reset the saltation matrix maps
    /// the incoming flow onto the outgoing one, fixes the guard's tangent
    /// and agrees with the numeric oracle.
    #[test]
    fn constant_flow_invariants(
        f_i in vec2(),
        f_j in vec2(),
        normal in vec2(),
    ) {
        prop_assume!(normal.norm() > 0.2);
        prop_assume!(normal.dot(&f_i) < -0.2 * normal.norm());
        prop_assume!(normal.dot(&f_j) < -0.2 * normal.norm());
        let sys = constant_flow_two_mode(&f_i, &f_j, &normal, 0.0).unwrap();
        let opts = SimOptions::default();
        let ev = event_at(&sys, 0, 0.0, &Vector::zeros(2));
        let xi = saltation(&sys, &ev, &opts).unwrap().xi;
        prop_assert!((&xi * &f_i - &f_j).norm() < 1e-12 * (1.0 + f_j.norm()));
        let tangent = v(&[-normal[1], normal[0]]);
        prop_assert!((&xi * &tangent - &tangent).norm() < 1e-12 * tangent.norm());
        let det = xi.determinant();
        let expected = normal.dot(&f_j) / normal.dot(&f_i);
        prop_assert!((det - expected).abs() < 1e-10 * expected.abs().max(1.0));
        let num = numeric_saltation(&sys, ModeId(0), &ev.x_minus, 0.0, 1e-6, &opts).unwrap();
        prop_assert!((&xi - &num).amax() < 1e-6 * xi.amax().max(1.0));
    }

    /// The impact saltation matrix of the bouncing ball has determinant
    /// e^2 for any pre-impact velocity.
    #[test]
    fn impact_determinant_is_restitution_squared(e in 0.0..1.0f64, vel in -10.0..-0.1f64) {
        let sys = bouncing_ball(e, G).unwrap();
        let ev = event_at(&sys, 0, 0.0, &v(&[0.0, vel]));
        let xi = saltation(&sys, &ev, &SimOptions::default()).unwrap().xi;
        prop_assert!((xi.determinant() - e * e).abs() < 1e-12);
    }
}
