use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::cost::brute_force_cost;
use super::jump::{fd_flow_jacobian, numeric_saltation};
use super::monte_carlo::{monte_carlo_covariance, sample_normal};
use super::report::OracleReport;
use crate::error::{Error, Result};
use crate::hybrid::{simulate, EventRecord, HybridSystem, ModeId, SimOptions};
use crate::linalg::{rel_error, Matrix, Vector};
use crate::models::{
    affine_bounce_benchmark, ball_drop, bouncing_ball, constant_flow_example, coulomb_ball,
    thrust_pulse, two_link_arm, BallDropParams, BallFriction, CoulombBallParams, TwoLinkParams,
};
use crate::propagation::{
    hybrid_lqr, monodromy, periodic_orbit, propagate_covariance, variational_flow,
    LqrProblem, PeriodSpec,
};
use crate::rigid_body::{closed_form_saltation, ContactMode, RigidBodyModel};
use crate::saltation::saltation;

/// A built-in system with a reference initial condition whose execution
/// exercises the system's transitions.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub sys: HybridSystem,
    pub model: Option<RigidBodyModel>,
    pub mode0: ModeId,
    pub x0: Vector,
    pub t_span: (f64, f64),
    /// Per-coordinate variance of the Monte Carlo initial distribution.
    pub mc_variance: f64,
}

fn v(x: &[f64]) -> Vector {
    Vector::from_column_slice(x)
}

fn rigid(name: &str, pair: (RigidBodyModel, HybridSystem), x0: &[f64], t1: f64) -> Scenario {
    Scenario {
        name: name.into(),
        sys: pair.1,
        model: Some(pair.0),
        mode0: ContactMode::U.id(),
        x0: v(x0),
        t_span: (0.0, t1),
        mc_variance: 1e-6,
    }
}

fn plain(name: &str, sys: HybridSystem, x0: &[f64], t1: f64) -> Scenario {
    Scenario {
        name: name.into(),
        sys,
        model: None,
        mode0: ModeId(0),
        x0: v(x0),
        t_span: (0.0, t1),
        mc_variance: 1e-6,
    }
}

pub fn builtin_scenarios() -> Result<Vec<Scenario>> {
    let g = 9.81;
    let stick = BallDropParams {
        friction: BallFriction::InfiniteStick,
        ..Default::default()
    };
    let elastic = BallDropParams {
        e: 0.5,
        ..Default::default()
    };
    let mut slide = rigid("ball-drop-slide", ball_drop(&BallDropParams::default())?, &[0.0, 1.0, 0.0, 0.0], 1.0);
    slide.mc_variance = 1e-4;
    Ok(vec![
        plain("bouncing-ball-e0", bouncing_ball(0.0, g)?, &[1.0, 0.0], 0.6),
        plain("bouncing-ball-e0.5", bouncing_ball(0.5, g)?, &[1.0, 0.0], 1.0),
        plain("bouncing-ball-e1", bouncing_ball(1.0, g)?, &[1.0, 0.0], 1.2),
        plain("constant-flow", constant_flow_example(), &[0.0, 1.0], 2.0),
        slide,
        rigid("ball-drop-stick", ball_drop(&stick)?, &[0.0, 1.0, 0.3, 0.0], 1.0),
        rigid("ball-drop-elastic", ball_drop(&elastic)?, &[0.0, 1.0, 0.0, 0.0], 1.0),
        rigid(
            "ball-drop-pulse",
            ball_drop(&BallDropParams::default().with_input(thrust_pulse(1.0, g)))?,
            &[0.0, 0.3, 0.0, 0.0],
            2.0,
        ),
        rigid("two-link-arm", two_link_arm(&TwoLinkParams::default())?, &[0.3, -0.9, 0.0, 0.0], 0.5),
        rigid("coulomb-ball", coulomb_ball(&CoulombBallParams::default())?, &[0.0, 0.5, 0.0, 0.0], 1.5),
        plain("affine-bounce", affine_bounce_benchmark().to_system(), &[1.0, 0.0], 2.5),
    ])
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub seed: u64,
    pub mc_samples: usize,
    /// Central-difference step of the numeric saltation oracle.
    pub h: f64,
    pub sim: SimOptions,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 7,
            mc_samples: 100_000,
            h: 1e-6,
            sim: SimOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: usize,
    pub failed: usize,
    pub pass: bool,
    pub reports: Vec<OracleReport>,
}

fn event_label(s: &Scenario, k: usize, ev: &EventRecord) -> String {
    format!("{}/{}:{}", s.name, k, s.sys.transitions[ev.transition].name)
}

fn failure(name: String, e: &Error) -> OracleReport {
    // Errors surface as failing reports so a run always produces a full
    // report; the message is carried in the name.
    OracleReport::with_error(
        format!("{name} [error: {e}]"),
        Matrix::zeros(0, 0),
        Matrix::zeros(0, 0),
        f64::INFINITY,
        0.0,
    )
}

fn or_failure(name: String, r: Result<OracleReport>) -> OracleReport {
    r.unwrap_or_else(|e| failure(name, &e))
}

/// Analytic saltation against the numeric oracle and, for rigid-body
/// models, against the closed form.
fn saltation_checks(s: &Scenario, events: &[EventRecord], o: &SuiteOptions) -> Vec<OracleReport> {
    let mut out = Vec::new();
    for (k, ev) in events.iter().enumerate() {
        let label = event_label(s, k, ev);
        let analytic = saltation(&s.sys, ev, &o.sim).map(|r| r.xi);
        out.push(or_failure(format!("numeric-saltation/{label}"), (|| {
            let xi = analytic.clone()?;
            let num = numeric_saltation(&s.sys, ev.from, &ev.x_minus, ev.t_event, o.h, &o.sim)?;
            Ok(OracleReport::compare(format!("numeric-saltation/{label}"), xi, num, 1e-4))
        })()));
        if let Some(model) = &s.model {
            out.push(or_failure(format!("closed-form/{label}"), (|| {
                let xi = analytic.clone()?;
                let cf = closed_form_saltation(model, ev, &o.sim)?;
                Ok(OracleReport::compare(format!("closed-form/{label}"), xi, cf, 1e-6))
            })()));
        }
    }
    out
}

/// Window `(t_a, t_b)` around event `k` that contains no other event.
fn window(events: &[EventRecord], k: usize, t_span: (f64, f64), before: f64, after: f64) -> (f64, f64) {
    let te = events[k].t_event;
    let prev = if k > 0 { events[k - 1].t_event } else { t_span.0 };
    let next = events.get(k + 1).map_or(t_span.1, |e| e.t_event);
    let t_a = (te - before).max(0.5 * (prev + te));
    let t_b = (te + after).min(0.5 * (te + next));
    (t_a, t_b)
}

/// State and mode of the scenario's execution at time `t`.
fn state_at(s: &Scenario, t: f64, opts: &SimOptions) -> Result<(ModeId, Vector)> {
    let traj = simulate(&s.sys, s.mode0, &s.x0, (s.t_span.0, t), opts)?;
    Ok((traj.final_mode(), traj.final_state().clone()))
}

/// `A_J Xi A_I` over a grid step straddling each event against the
/// finite-difference Jacobian of the simulated step.
fn sandwich_checks(s: &Scenario, events: &[EventRecord], o: &SuiteOptions) -> Vec<OracleReport> {
    (0..events.len())
        .map(|k| {
            let name = format!("sandwich/{}", event_label(s, k, &events[k]));
            or_failure(name.clone(), (|| {
                let (t_a, t_b) = window(events, k, s.t_span, 0.006, 0.004);
                let (mode, x_a) = state_at(s, t_a, &o.sim)?;
                let step = simulate(&s.sys, mode, &x_a, (t_a, t_b), &o.sim)?;
                let ev = step.events.first().ok_or_else(|| {
                    Error::InvalidParameter("event not reproduced in the step".into())
                })?;
                let a_i = variational_flow(&s.sys, mode, t_a, &x_a, ev.t_event, &o.sim)?;
                let xi = saltation(&s.sys, ev, &o.sim)?.xi;
                let a_j = variational_flow(&s.sys, ev.to, ev.t_event, &ev.x_plus, t_b, &o.sim)?;
                let analytic = crate::saltation::sandwich(&a_j, &xi, &a_i)?;
                let fd = fd_flow_jacobian(&s.sys, mode, &x_a, (t_a, t_b), o.h, &o.sim)?;
                Ok(OracleReport::compare(name.clone(), analytic, fd, 1e-4))
            })())
        })
        .collect()
}

/// Propagated covariance through the first event against Monte Carlo.
fn covariance_check(s: &Scenario, events: &[EventRecord], o: &SuiteOptions, index: u64) -> OracleReport {
    let name = format!("monte-carlo/{}", event_label(s, 0, &events[0]));
    or_failure(name.clone(), (|| {
        // Long enough that six standard deviations of event-time spread
        // stay inside the window.
        let ev = &events[0];
        let grad = s.sys.transitions[ev.transition].guard.gradient(ev.t_event, &ev.x_minus);
        let spread = (6.0 * s.mc_variance.sqrt() * grad.norm() / ev.transversality.abs()).clamp(0.005, 0.05);
        let (t_a, t_b) = window(events, 0, s.t_span, spread, spread);
        let (mode, x_a) = state_at(s, t_a, &o.sim)?;
        let n = x_a.len();
        let sigma0 = Matrix::identity(n, n) * s.mc_variance;
        let traj = simulate(&s.sys, mode, &x_a, (t_a, t_b), &o.sim)?;
        let prop = propagate_covariance(&s.sys, &traj, &sigma0, &o.sim)?;
        let sigma = prop.last().unwrap().sigma.clone();
        let mc = monte_carlo_covariance(
            &s.sys,
            mode,
            &x_a,
            &sigma0,
            (t_a, t_b),
            o.mc_samples,
            o.seed.wrapping_add(index),
            &o.sim,
        )?;
        let err = rel_error(&sigma, &mc.sigma, 0.0);
        Ok(OracleReport::with_error(name.clone(), sigma, mc.sigma, err, 0.05))
    })())
}

/// The LQR policy on the one-event affine benchmark against random gain
/// perturbations of 10% of each gain's norm, evaluated by brute-force
/// rollouts from every signed coordinate perturbation.
fn lqr_check(o: &SuiteOptions) -> OracleReport {
    let name = "lqr-brute-force/affine-bounce".to_string();
    or_failure(name.clone(), (|| {
        let sys = affine_bounce_benchmark().to_system();
        let traj = simulate(&sys, ModeId(0), &v(&[1.0, 0.0]), (0.0, 2.5), &o.sim)?;
        let problem = LqrProblem::constant(
            Matrix::from_column_slice(2, 1, &[0.0, 1.0]),
            Matrix::identity(2, 2),
            Matrix::identity(1, 1) * 0.1,
            Matrix::identity(2, 2),
            0.01,
        );
        let sol = hybrid_lqr(&sys, &traj, &problem, &o.sim)?;
        let dx0s: Vec<Vector> = [[1e-3, 0.0], [-1e-3, 0.0], [0.0, 1e-3], [0.0, -1e-3]]
            .iter()
            .map(|d| v(d))
            .collect();
        let cost = |gains: &[Matrix]| -> Result<f64> {
            dx0s.iter().try_fold(0.0, |acc, dx| {
                Ok(acc + brute_force_cost(&sys, &sol.nominal, &problem, gains, dx, &o.sim)?.total)
            })
        };
        let best = cost(&sol.gains)?;
        let trials: Vec<Result<f64>> = (0..100u64)
            .into_par_iter()
            .map(|trial| {
                let gains: Vec<Matrix> = sol
                    .gains
                    .iter()
                    .enumerate()
                    .map(|(k, g)| {
                        let z = sample_normal(o.seed ^ 0x5eed_1a97, trial * 100_000 + k as u64, g.len());
                        let dir = Matrix::from_column_slice(g.nrows(), g.ncols(), z.as_slice());
                        g + dir * (0.1 * g.norm() / z.norm().max(f64::MIN_POSITIVE))
                    })
                    .collect();
                cost(&gains)
            })
            .collect();
        let trials = trials.into_iter().collect::<Result<Vec<_>>>()?;
        let worst_margin = trials.iter().map(|c| best - c).fold(f64::NEG_INFINITY, f64::max);
        let min_trial = trials.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(OracleReport::with_error(
            name.clone(),
            Matrix::from_element(1, 1, best),
            Matrix::from_element(1, 1, min_trial),
            (worst_margin / best).max(0.0),
            0.0,
        ))
    })())
}

/// LQR gains on an event-free double integrator against the plain
/// discrete Riccati recursion.
fn textbook_lqr_check(o: &SuiteOptions) -> OracleReport {
    let name = "lqr-textbook/double-integrator".to_string();
    or_failure(name.clone(), (|| {
        let mut sys = HybridSystem::new();
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let a1 = a.clone();
        sys.add_mode(
            "free",
            crate::hybrid::VectorFieldSpec::new(2, move |_, x| &a1 * x)
                .with_jacobian(move |_, _| a.clone()),
        );
        let dt = 0.05;
        let traj = simulate(&sys, ModeId(0), &v(&[1.0, 0.0]), (0.0, 1.0), &o.sim)?;
        let b = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let problem = LqrProblem::constant(
            b,
            Matrix::identity(2, 2),
            Matrix::identity(1, 1) * 0.5,
            Matrix::identity(2, 2) * 2.0,
            dt,
        );
        let sol = hybrid_lqr(&sys, &traj, &problem, &o.sim)?;
        let ad = Matrix::from_row_slice(2, 2, &[1.0, dt, 0.0, 1.0]);
        let bd = Matrix::from_column_slice(2, 1, &[0.5 * dt * dt, dt]);
        let (qd, vd) = (Matrix::identity(2, 2) * dt, Matrix::identity(1, 1) * (0.5 * dt));
        let mut p = Matrix::identity(2, 2) * 2.0;
        let mut gains = Vec::new();
        for _ in 0..sol.gains.len() {
            let s = &vd + bd.transpose() * &p * &bd;
            let k = s.try_inverse().unwrap() * bd.transpose() * &p * &ad;
            p = &qd + ad.transpose() * &p * (&ad - &bd * &k);
            p = (&p + p.transpose()) * 0.5;
            gains.push(k);
        }
        gains.reverse();
        let err = sol
            .gains
            .iter()
            .zip(&gains)
            .map(|(a, b)| (a - b).amax() / b.amax().max(1.0))
            .fold(0.0, f64::max);
        let stack = |g: &[Matrix]| Matrix::from_fn(g.len(), 2, |i, j| g[i][(0, j)]);
        Ok(OracleReport::with_error(name.clone(), stack(&sol.gains), stack(&gains), err, 1e-8))
    })())
}

/// Floquet relation on the elastic bouncing ball, comparing each
/// multiplier with `exp(mu T)`.
fn floquet_check(o: &SuiteOptions) -> OracleReport {
    let name = "floquet/bouncing-ball-e1".to_string();
    or_failure(name.clone(), (|| {
        let sys = bouncing_ball(1.0, 9.81)?;
        let traj = periodic_orbit(&sys, ModeId(0), &v(&[1.0, 0.0]), 0.0, PeriodSpec::AutoFromX0 { t_max: 10.0 }, &o.sim)?;
        let r = monodromy(&sys, &traj, 1e-6, &o.sim)?;
        let rebuilt: Vec<Complex64> = r.exponents.iter().map(|m| (m * r.period).exp()).collect();
        let err = r
            .multipliers
            .iter()
            .zip(&rebuilt)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let col = |c: &[Complex64]| Matrix::from_fn(c.len(), 2, |i, j| if j == 0 { c[i].re } else { c[i].im });
        Ok(OracleReport::with_error(name.clone(), col(&r.multipliers), col(&rebuilt), err, 1e-9))
    })())
}

/// Runs every oracle over every built-in scenario. Failures, including
/// errors raised by a check, are recorded in the report rather than
/// returned.
pub fn run_suite(o: &SuiteOptions) -> Result<VerifyReport> {
    let scenarios = builtin_scenarios()?;
    let mut reports = Vec::new();
    for (idx, s) in scenarios.iter().enumerate() {
        let traj = match simulate(&s.sys, s.mode0, &s.x0, s.t_span, &o.sim) {
            Ok(traj) => traj,
            Err(e) => {
                reports.push(failure(format!("simulate/{}", s.name), &e));
                continue;
            }
        };
        if traj.events.is_empty() {
            reports.push(failure(
                format!("simulate/{}", s.name),
                &Error::InvalidParameter("reference execution has no events".into()),
            ));
            continue;
        }
        reports.extend(saltation_checks(s, &traj.events, o));
        reports.extend(sandwich_checks(s, &traj.events, o));
        reports.push(covariance_check(s, &traj.events, o, idx as u64));
    }
    reports.push(lqr_check(o));
    reports.push(textbook_lqr_check(o));
    reports.push(floquet_check(o));
    let passed = reports.iter().filter(|r| r.pass).count();
    let failed = reports.len() - passed;
    Ok(VerifyReport {
        seed: o.seed,
        passed,
        failed,
        pass: failed == 0,
        reports,
    })
}
