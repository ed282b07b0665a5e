use proptest::prelude::*;
use saltlib::hybrid::{simulate, HybridTrajectory, ModeId, VectorFieldSpec};
use saltlib::linalg::{is_psd, rel_error, spd_inverse};
use saltlib::models::{affine_bounce_benchmark, bouncing_ball};
use saltlib::oracles::monte_carlo_covariance;
use saltlib::propagation::{
    fundamental_matrix, hybrid_lqr, monodromy, periodic_orbit, propagate_covariance, riccati_jump,
    LqrProblem, PeriodSpec, Stability,
};
use saltlib::{HybridSystem, Matrix, SimOptions, Vector};

const G: f64 = 9.81;

fn v(x: &[f64]) -> Vector {
    Vector::from_row_slice(x)
}

fn double_integrator() -> HybridSystem {
    let mut sys = HybridSystem::new();
    sys.add_mode(
        "free",
        VectorFieldSpec::new(2, |_, x| v(&[x[1], 0.0]))
            .with_jacobian(|_, _| Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])),
    );
    sys
}

fn double_integrator_run(t1: f64) -> (HybridSystem, HybridTrajectory) {
    let sys = double_integrator();
    let traj = simulate(&sys, ModeId(0), &v(&[1.0, 0.0]), (0.0, t1), &SimOptions::default()).unwrap();
    (sys, traj)
}

fn problem(b: Matrix, q: f64, r: f64, pt: f64, dt: f64) -> LqrProblem {
    LqrProblem::constant(b, Matrix::identity(2, 2) * q, Matrix::identity(1, 1) * r, Matrix::identity(2, 2) * pt, dt)
}

#[test]
fn lqr_matches_discrete_riccati_recursion() {
    let (sys, traj) = double_integrator_run(1.0);
    let dt = 0.05;
    let b = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
    let p = problem(b, 1.0, 0.5, 2.0, dt);
    let sol = hybrid_lqr(&sys, &traj, &p, &SimOptions::default()).unwrap();

    // Exact zero-order-hold discretization with trapezoidal input map.
    let a = Matrix::from_row_slice(2, 2, &[1.0, dt, 0.0, 1.0]);
    let bd = Matrix::from_column_slice(2, 1, &[0.5 * dt * dt, dt]);
    let mut pk = Matrix::identity(2, 2) * 2.0;
    let n = sol.gains.len();
    assert_eq!(n, 20);
    for k in (0..n).rev() {
        let s = Matrix::identity(1, 1) * (0.5 * dt) + bd.transpose() * &pk * &bd;
        let gain = spd_inverse(&s).unwrap() * bd.transpose() * &pk * &a;
        assert!((&gain - &sol.gains[k]).amax() < 1e-8, "step {k}");
        pk = Matrix::identity(2, 2) * dt + a.transpose() * &pk * &a - a.transpose() * &pk * &bd * &gain;
        assert!((&pk - &sol.values[k].p).amax() < 1e-8 * pk.amax());
    }
}

#[test]
fn zero_input_matrix_gives_zero_gains() {
    let (sys, traj) = double_integrator_run(0.5);
    let p = problem(Matrix::zeros(2, 1), 1.0, 0.1, 1.0, 0.01);
    let sol = hybrid_lqr(&sys, &traj, &p, &SimOptions::default()).unwrap();
    assert!(sol.gains.iter().all(|k| k.amax() == 0.0));
}

#[test]
fn zero_cost_gives_zero_value() {
    let (sys, traj) = double_integrator_run(0.5);
    let p = problem(Matrix::from_column_slice(2, 1, &[0.0, 1.0]), 0.0, 0.1, 0.0, 0.01);
    let sol = hybrid_lqr(&sys, &traj, &p, &SimOptions::default()).unwrap();
    assert!(sol.gains.iter().all(|k| k.amax() == 0.0));
    assert!(sol.values.iter().all(|s| s.p.amax() == 0.0));
}

#[test]
fn scaling_every_weight_keeps_gains_and_scales_value() {
    let sys = affine_bounce_benchmark().to_system();
    let opts = SimOptions::default();
    let traj = simulate(&sys, ModeId(0), &v(&[1.0, 0.0]), (0.0, 2.5), &opts).unwrap();
    let b = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
    let base = hybrid_lqr(&sys, &traj, &problem(b.clone(), 1.0, 0.1, 1.0, 0.01), &opts).unwrap();
    let twice = hybrid_lqr(&sys, &traj, &problem(b.clone(), 2.0, 0.2, 2.0, 0.01), &opts).unwrap();
    for (k1, k2) in base.gains.iter().zip(&twice.gains) {
        assert!((k1 - k2).amax() < 1e-9 * k1.amax().max(1.0));
    }
    assert!((&base.values[0].p * 2.0 - &twice.values[0].p).amax() < 1e-9 * twice.values[0].p.amax());

    // Doubling only Q raises the value and the feedback.
    let heavier = hybrid_lqr(&sys, &traj, &problem(b, 2.0, 0.1, 1.0, 0.01), &opts).unwrap();
    let diff = &heavier.values[0].p - &base.values[0].p;
    assert!(is_psd(&diff, 1e-12) && diff.amax() > 0.0);
    assert!(heavier.gains[0].norm() > base.gains[0].norm());
}

#[test]
fn only_the_elastic_orbit_closes() {
    let sys = bouncing_ball(0.5, G).unwrap();
    let opts = SimOptions::default();
    // With e < 1 the apex after the first bounce is lower than the start.
    let traj = periodic_orbit(&sys, ModeId(0), &v(&[1.0, 0.0]), 0.0, PeriodSpec::AutoFromX0 { t_max: 5.0 }, &opts).unwrap();
    assert!(monodromy(&sys, &traj, 1e-6, &opts).is_err());

    let elastic = bouncing_ball(1.0, G).unwrap();
    let traj = periodic_orbit(&elastic, ModeId(0), &v(&[1.0, 0.0]), 0.0, PeriodSpec::AutoFromX0 { t_max: 5.0 }, &opts).unwrap();
    let r = monodromy(&elastic, &traj, 1e-6, &opts).unwrap();
    assert_eq!(r.verdict, Stability::Marginal);
    assert!((r.period - 2.0 * (2.0 / G).sqrt()).abs() < 1e-9);
    assert!((r.phi.determinant() - 1.0).abs() < 1e-9);
    assert!((r.phi.trace() - 2.0).abs() < 1e-6);
}

#[test]
fn fundamental_matrix_determinant_tracks_restitution() {
    let sys = bouncing_ball(0.5, G).unwrap();
    let opts = SimOptions::default();
    let traj = simulate(&sys, ModeId(0), &v(&[1.0, 0.0]), (0.0, 1.2), &opts).unwrap();
    let impacts = traj.events.iter().filter(|e| e.transition == 0).count() as i32;
    let phi = fundamental_matrix(&sys, &traj, &opts).unwrap().phi;
    assert!((phi.determinant() - 0.25f64.powi(impacts)).abs() < 1e-9);
}

#[test]
fn monte_carlo_converges_for_every_seed() {
    let sys = bouncing_ball(0.8, G).unwrap();
    let opts = SimOptions::default();
    let (t0, t1) = (0.42, 0.48);
    let pre = simulate(&sys, ModeId(0), &v(&[1.0, 0.0]), (0.0, t0), &opts).unwrap();
    let x0 = pre.final_state().clone();
    let traj = simulate(&sys, ModeId(0), &x0, (t0, t1), &opts).unwrap();
    let sigma0 = Matrix::identity(2, 2) * 1e-6;
    let predicted = propagate_covariance(&sys, &traj, &sigma0, &opts).unwrap().last().unwrap().sigma.clone();
    for seed in 1..=5 {
        let mc = monte_carlo_covariance(&sys, ModeId(0), &x0, &sigma0, (t0, t1), 20_000, seed, &opts).unwrap();
        assert_eq!(mc.diverged, 0);
        let gap = rel_error(&mc.sigma, &predicted, 0.0);
        assert!(gap < 0.05, "seed {seed}: gap {gap}");
    }
}

fn psd(dim: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-1.0..1.0f64, dim * dim).prop_map(move |e| {
        let a = Matrix::from_vec(dim, dim, e);
        &a * a.transpose()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn riccati_jump_preserves_symmetry_and_psd(
        (xi, p, q) in (1usize..5).prop_flat_map(|n| (
            prop::collection::vec(-2.0..2.0f64, n * n).prop_map(move |e| Matrix::from_vec(n, n, e)),
            psd(n),
            psd(n),
        ))
    ) {
        let pm = riccati_jump(&xi, &p, Some(&q)).unwrap();
        prop_assert_eq!(&pm, &pm.transpose());
        prop_assert!(is_psd(&pm, 1e-12 * pm.amax().max(1.0)));
        let without = riccati_jump(&xi, &p, None).unwrap();
        prop_assert!((&pm - &without - &q).amax() < 1e-12 * pm.amax().max(1.0));
    }

    /// Propagated covariances stay symmetric positive semidefinite through
    /// an impact.
    #[test]
    fn covariance_stays_psd(e in 0.2..1.0f64, s in psd(2)) {
        let sys = bouncing_ball(e, G).unwrap();
        let opts = SimOptions::default();
        let traj = simulate(&sys, ModeId(0), &v(&[1.0, 0.0]), (0.0, 0.6), &opts).unwrap();
        for state in propagate_covariance(&sys, &traj, &s, &opts).unwrap() {
            prop_assert_eq!(&state.sigma, &state.sigma.transpose());
            prop_assert!(is_psd(&state.sigma, 1e-12 * state.sigma.amax().max(1e-300)));
        }
    }
}
