use saltlib::hybrid::{simulate, GuardSpec, ModeId, ResetSpec, VectorFieldSpec};
use saltlib::models::{bouncing_ball, AffineModel};
use saltlib::{Error, HybridSystem, SimOptions, Vector};

const G: f64 = 9.81;

fn v(x: &[f64]) -> Vector {
    Vector::from_row_slice(x)
}

#[test]
fn first_impact_time_is_exact() {
    let sys = bouncing_ball(0.8, G).unwrap();
    let traj = simulate(&sys, ModeId(0), &v(&[1.0, 0.0]), (0.0, 0.6), &SimOptions::default()).unwrap();
    let ev = &traj.events[0];
    assert!((ev.t_event - (2.0 / G).sqrt()).abs() < 1e-10);
    assert!(ev.guard_residual.abs() <= 1e-10);
    assert!((ev.x_plus[1] + 0.8 * ev.x_minus[1]).abs() < 1e-12);
}

#[test]
fn restitution_one_half_is_zeno() {
    let sys = bouncing_ball(0.5, G).unwrap();
    let opts = SimOptions {
        max_events: 50,
        ..SimOptions::default()
    };
    let err = simulate(&sys, ModeId(0), &v(&[1.0, 0.0]), (0.0, 2.0), &opts).unwrap_err();
    let Error::ZenoSuspected { events, t } = err else {
        panic!("expected Zeno, got {err}");
    };
    assert_eq!(events, 51);
    // Impacts accumulate at three times the first fall time.
    let t_inf = 3.0 * (2.0 / G).sqrt();
    assert!(t < t_inf && t > t_inf - 1e-5, "t = {t}, limit {t_inf}");
}

#[test]
fn impact_intervals_shrink_geometrically() {
    let sys = bouncing_ball(0.5, G).unwrap();
    let traj = simulate(&sys, ModeId(0), &v(&[1.0, 0.0]), (0.0, 1.35), &SimOptions::default()).unwrap();
    let impacts: Vec<f64> = traj
        .events
        .iter()
        .filter(|e| e.transition == 0)
        .map(|e| e.t_event)
        .collect();
    assert!(impacts.len() >= 7);
    let gaps: Vec<f64> = impacts.windows(2).map(|w| w[1] - w[0]).collect();
    for w in gaps.windows(2) {
        assert!((w[1] / w[0] - 0.5).abs() < 1e-6, "ratio {}", w[1] / w[0]);
    }
}

#[test]
fn segments_are_continuous_across_events() {
    let sys = bouncing_ball(0.7, G).unwrap();
    let traj = simulate(&sys, ModeId(0), &v(&[1.0, 0.0]), (0.0, 2.0), &SimOptions::default()).unwrap();
    assert_eq!(traj.segments.len(), traj.events.len() + 1);
    for (k, ev) in traj.events.iter().enumerate() {
        let before = &traj.segments[k];
        let after = &traj.segments[k + 1];
        assert_eq!(*before.times.last().unwrap(), ev.t_event);
        assert_eq!(after.times[0], ev.t_event);
        assert_eq!(before.states.last().unwrap(), &ev.x_minus);
        assert_eq!(&after.states[0], &ev.x_plus);
        assert_eq!((before.mode, after.mode), (ev.from, ev.to));
    }
}

fn single_mode(guard: GuardSpec) -> HybridSystem {
    let mut sys = HybridSystem::new();
    let m = sys.add_mode("drift", VectorFieldSpec::new(1, |_, _| v(&[1.0])));
    sys.add_transition("t", m, m, guard, ResetSpec::identity(1));
    sys
}

#[test]
fn time_only_guard_is_degenerate() {
    let sys = single_mode(GuardSpec::new(|t, _| 0.5 - t).with_gradient(|_, _| v(&[0.0])));
    let err = simulate(&sys, ModeId(0), &v(&[0.0]), (0.0, 1.0), &SimOptions::default()).unwrap_err();
    assert!(matches!(err, Error::DegenerateGuard { .. }), "{err}");
}

#[test]
fn grazing_contact_is_tangential() {
    // g = -(x - 1)^3 crosses zero with zero rate.
    let sys = single_mode(
        GuardSpec::new(|_, x| -(x[0] - 1.0).powi(3)).with_gradient(|_, x| v(&[-3.0 * (x[0] - 1.0).powi(2)])),
    );
    let err = simulate(&sys, ModeId(0), &v(&[0.0]), (0.0, 2.0), &SimOptions::default()).unwrap_err();
    assert!(
        matches!(err, Error::TangentialEvent { .. } | Error::DegenerateGuard { .. }),
        "{err}"
    );
}

#[test]
fn invalid_affine_documents_name_the_field() {
    let err = AffineModel::from_json(r#"{"format": "saltlib-affine-v1", "modes": [], "transitions": [], "extra": 0}"#).unwrap_err();
    let Error::Schema { pointer, .. } = err else {
        panic!("expected schema error, got {err}");
    };
    assert_eq!(pointer, "/extra");
    let err = AffineModel::from_json(r#"{"format": "saltlib-affine-v1", "modes": [{"name": "a", "a": [[0]]}], "transitions": []}"#).unwrap_err();
    assert!(err.to_string().contains("/modes/0"), "{err}");
}
