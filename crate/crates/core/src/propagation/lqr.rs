use std::sync::Arc;

use serde::Serialize;

use super::flow::variational_flow;
use crate::error::{Error, Result};
use crate::hybrid::{simulate, EventRecord, HybridSystem, HybridTrajectory, ModeId, SimOptions};
use crate::linalg::{serde_rows, spd_inverse, symmetrize, Matrix, Vector};
use crate::saltation::saltation;

pub type ModeMatrixFn = Arc<dyn Fn(f64, ModeId) -> Matrix + Send + Sync>;

/// Finite-horizon LQR problem on a uniform grid of width `dt`. The stage
/// cost over one grid interval is `dx^T Q dx dt + u^T V u dt`.
#[derive(Clone)]
pub struct LqrProblem {
    pub b: ModeMatrixFn,
    pub q: ModeMatrixFn,
    pub v: ModeMatrixFn,
    pub p_terminal: Matrix,
    pub dt: f64,
}

impl LqrProblem {
    /// Problem whose matrices are the same in every mode and at every time.
    pub fn constant(b: Matrix, q: Matrix, v: Matrix, p_terminal: Matrix, dt: f64) -> Self {
        LqrProblem {
            b: Arc::new(move |_, _| b.clone()),
            q: Arc::new(move |_, _| q.clone()),
            v: Arc::new(move |_, _| v.clone()),
            p_terminal,
            dt,
        }
    }

    /// Copy with the state weight scaled by `s`.
    pub fn scale_q(&self, s: f64) -> Self {
        let q = self.q.clone();
        LqrProblem {
            q: Arc::new(move |t, m| q(t, m) * s),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValueState {
    pub t: f64,
    pub mode: ModeId,
    #[serde(with = "serde_rows")]
    pub p: Matrix,
}

/// Value-function Hessian just before an event:
/// `P^- = Q + Xi^T P^+ Xi`, symmetrized.
pub fn riccati_jump(xi: &Matrix, p_plus: &Matrix, q_stage: Option<&Matrix>) -> Result<Matrix> {
    if p_plus.shape() != (xi.nrows(), xi.nrows()) {
        return Err(Error::dims("post-event value matrix", xi.nrows(), p_plus.nrows()));
    }
    let mut p = xi.transpose() * p_plus * xi;
    if let Some(q) = q_stage {
        if q.shape() != p.shape() {
            return Err(Error::dims("jump stage cost", p.nrows(), q.nrows()));
        }
        p += q;
    }
    Ok(symmetrize(&p))
}

/// States of a piecewise-constant-input rollout sampled on the LQR grid.
#[derive(Debug, Clone)]
pub struct GridRollout {
    pub times: Vec<f64>,
    pub modes: Vec<ModeId>,
    pub states: Vec<Vector>,
    /// Event inside grid interval `k`, if any.
    pub step_events: Vec<Option<EventRecord>>,
}

pub(crate) fn lqr_grid(t0: f64, t1: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(t1 > t0) {
        return Err(Error::InvalidParameter(format!(
            "LQR needs dt > 0 and a positive horizon, got dt = {dt} on ({t0}, {t1})"
        )));
    }
    let n = ((t1 - t0) / dt).round().max(1.0) as usize;
    Ok((0..=n)
        .map(|k| if k == n { t1 } else { t0 + k as f64 * dt })
        .collect())
}

/// Roll out the system on `times`, holding `control(k, mode, x)` constant on
/// each grid interval.
pub fn rollout(
    sys: &HybridSystem,
    problem: &LqrProblem,
    mode0: ModeId,
    x0: &Vector,
    times: &[f64],
    mut control: impl FnMut(usize, ModeId, &Vector) -> Vector,
    opts: &SimOptions,
) -> Result<GridRollout> {
    let mut out = GridRollout {
        times: times.to_vec(),
        modes: vec![mode0],
        states: vec![x0.clone()],
        step_events: Vec::with_capacity(times.len()),
    };
    for k in 0..times.len() - 1 {
        let (mode, x) = (out.modes[k], out.states[k].clone());
        let u = control(k, mode, &x);
        let sys_u = sys.with_input(problem.b.as_ref(), &u, times[k]);
        let traj = simulate(&sys_u, mode, &x, (times[k], times[k + 1]), opts)?;
        if traj.events.len() > 1 {
            return Err(Error::MultipleEventsInStep { step: k });
        }
        out.modes.push(traj.final_mode());
        out.states.push(traj.final_state().clone());
        out.step_events.push(traj.events.into_iter().next());
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct LqrSolution {
    /// Feedback gains `u_k = -K_k dx_k`.
    pub gains: Vec<Matrix>,
    /// Value matrices `P_0 .. P_N` on the grid.
    pub values: Vec<ValueState>,
    pub nominal: GridRollout,
}

/// Discrete linearization of one grid interval of the nominal rollout.
struct StepModel {
    a: Matrix,
    b: Matrix,
    /// `A^T P A` given `P` at the end of the interval.
    ata: Box<dyn Fn(&Matrix) -> Result<Matrix>>,
}

fn step_model(
    sys: &HybridSystem,
    problem: &LqrProblem,
    nom: &GridRollout,
    k: usize,
    opts: &SimOptions,
) -> Result<StepModel> {
    let (t0, t1) = (nom.times[k], nom.times[k + 1]);
    let (m0, x0) = (nom.modes[k], &nom.states[k]);
    match &nom.step_events[k] {
        None => {
            let a = variational_flow(sys, m0, t0, x0, t1, opts)?;
            let b = (&a * (problem.b)(t0, m0) + (problem.b)(t1, m0)) * (0.5 * (t1 - t0));
            let a2 = a.clone();
            Ok(StepModel {
                a,
                b,
                ata: Box::new(move |p| Ok(symmetrize(&(a2.transpose() * p * &a2)))),
            })
        }
        Some(ev) => {
            let te = ev.t_event;
            let a1 = variational_flow(sys, m0, t0, x0, te, opts)?;
            let xi = saltation(sys, ev, opts)?.xi;
            let a2 = variational_flow(sys, ev.to, te, &ev.x_plus, t1, opts)?;
            let a = &a2 * &xi * &a1;
            let b_pre = (&a1 * (problem.b)(t0, m0) + (problem.b)(te, m0)) * (0.5 * (te - t0));
            let b_post =
                (&a2 * (problem.b)(te, ev.to) + (problem.b)(t1, ev.to)) * (0.5 * (t1 - te));
            let b = &a2 * &xi * b_pre + b_post;
            Ok(StepModel {
                a,
                b,
                ata: Box::new(move |p| {
                    let mid = riccati_jump(&xi, &(a2.transpose() * p * &a2), None)?;
                    Ok(symmetrize(&(a1.transpose() * mid * &a1)))
                }),
            })
        }
    }
}

/// Time-varying LQR about the trajectory's initial condition, with the
/// value function jumped through each event by the saltation matrix.
pub fn hybrid_lqr(
    sys: &HybridSystem,
    traj: &HybridTrajectory,
    problem: &LqrProblem,
    opts: &SimOptions,
) -> Result<LqrSolution> {
    let times = lqr_grid(traj.t_start(), traj.t_end(), problem.dt)?;
    let n_in = (problem.b)(times[0], traj.initial_mode()).ncols();
    let nominal = rollout(
        sys,
        problem,
        traj.initial_mode(),
        traj.initial_state(),
        &times,
        |_, _, _| Vector::zeros(n_in),
        opts,
    )?;
    let n = times.len() - 1;
    let dim_end = nominal.states[n].len();
    if problem.p_terminal.shape() != (dim_end, dim_end) {
        return Err(Error::dims("terminal cost", dim_end, problem.p_terminal.nrows()));
    }
    let mut p = symmetrize(&problem.p_terminal);
    let mut values = vec![ValueState {
        t: times[n],
        mode: nominal.modes[n],
        p: p.clone(),
    }];
    let mut gains = Vec::with_capacity(n);
    for k in (0..n).rev() {
        let (tk, mk) = (times[k], nominal.modes[k]);
        let dt = times[k + 1] - tk;
        let step = step_model(sys, problem, &nominal, k, opts)?;
        let v = (problem.v)(tk, mk);
        if spd_inverse(&v).is_none() {
            return Err(Error::SingularInputPenalty { step: k });
        }
        let q_d = (problem.q)(tk, mk) * dt;
        let pb = &p * &step.b;
        let s = v * dt + step.b.transpose() * &pb;
        let s_inv = spd_inverse(&s).ok_or(Error::SingularInputPenalty { step: k })?;
        let bpa = pb.transpose() * &step.a;
        let gain = &s_inv * &bpa;
        let p_new = q_d + (step.ata)(&p)? - bpa.transpose() * &gain;
        p = symmetrize(&p_new);
        gains.push(gain);
        values.push(ValueState {
            t: tk,
            mode: mk,
            p: p.clone(),
        });
    }
    gains.reverse();
    values.reverse();
    Ok(LqrSolution {
        gains,
        values,
        nominal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::VectorFieldSpec;

    #[test]
    fn riccati_jump_is_symmetric_congruence() {
        let xi = Matrix::from_row_slice(2, 2, &[1.0, 0.5, -0.25, 2.0]);
        let p = Matrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0]);
        let q = Matrix::identity(2, 2);
        let pm = riccati_jump(&xi, &p, Some(&q)).unwrap();
        let expected = q + xi.transpose() * &p * &xi;
        assert!((&pm - expected).amax() < 1e-14);
        assert_eq!(pm, pm.transpose());
    }

    #[test]
    fn singular_input_penalty_is_reported() {
        let mut sys = HybridSystem::new();
        let m = sys.add_mode(
            "free",
            VectorFieldSpec::new(2, |_, x| Vector::from_vec(vec![x[1], 0.0])),
        );
        let traj = simulate(&sys, m, &Vector::from_vec(vec![1.0, 0.0]), (0.0, 0.1), &SimOptions::default()).unwrap();
        let problem = LqrProblem::constant(
            Matrix::from_column_slice(2, 1, &[0.0, 1.0]),
            Matrix::identity(2, 2),
            Matrix::zeros(1, 1),
            Matrix::identity(2, 2),
            0.01,
        );
        assert!(matches!(
            hybrid_lqr(&sys, &traj, &problem, &SimOptions::default()),
            Err(Error::SingularInputPenalty { step: 9 })
        ));
    }
}
