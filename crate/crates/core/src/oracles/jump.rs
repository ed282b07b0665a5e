use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hybrid::{rk4_step, simulate, simulate_until, EventRecord, HybridSystem, ModeId, SimOptions};
use crate::linalg::{Matrix, Vector};
use crate::propagation::variational_flow;

/// Integrate one mode's field from `t0` to `t1` without checking guards.
/// `t1 < t0` integrates backwards.
pub fn flow_mode(
    sys: &HybridSystem,
    mode: ModeId,
    t0: f64,
    x0: &Vector,
    t1: f64,
    step: f64,
) -> Vector {
    let field = &sys.mode(mode).field;
    let span = t1 - t0;
    let n = (span.abs() / step).ceil().max(1.0) as usize;
    let h = span / n as f64;
    let mut x = x0.clone();
    for k in 0..n {
        x = rk4_step(field, t0 + k as f64 * h, &x, h);
    }
    x
}

/// First event of a run started at `(t0, x0)`, with its post-reset state.
fn first_event(
    sys: &HybridSystem,
    mode0: ModeId,
    x0: &Vector,
    t0: f64,
    t_max: f64,
    opts: &SimOptions,
) -> Result<Option<EventRecord>> {
    let traj = simulate_until(sys, mode0, x0, (t0, t_max), opts, |_| true)?;
    Ok(traj.events.into_iter().next())
}

/// Post-event states of runs that pass through the virtual pre-event states
/// `x_minus + dx` at `t_minus`, all reported at a common time after every
/// run has jumped and pulled back to the nominal event time by the smooth
/// post-event flow.
struct PerturbedJumps {
    nominal: EventRecord,
    /// `A_J(t_f, t_event)^{-1} (x_k(t_f) - x(t_f))` for each perturbation.
    deltas: Vec<Vector>,
}

fn perturbed_jumps(
    sys: &HybridSystem,
    mode0: ModeId,
    x_minus: &Vector,
    t_minus: f64,
    dxs: &[Vector],
    opts: &SimOptions,
) -> Result<PerturbedJumps> {
    let n = sys.dim(mode0);
    if x_minus.len() != n {
        return Err(Error::dims("pre-event state", n, x_minus.len()));
    }
    let max_dx = dxs.iter().map(|d| d.amax()).fold(0.0, f64::max);
    // Start far enough back that no perturbed run has crossed yet.
    let lead = 1e-3 + 20.0 * max_dx;
    let t_start = t_minus - lead;
    let t_max = t_minus + lead;
    let back = |x: &Vector| flow_mode(sys, mode0, t_minus, x, t_start, opts.step);

    let nominal = first_event(sys, mode0, &back(x_minus), t_start, t_max, opts)?.ok_or_else(|| {
        Error::InvalidParameter(format!("no event within {lead} of t = {t_minus}"))
    })?;
    let runs: Vec<Result<EventRecord>> = dxs
        .par_iter()
        .map(|dx| {
            let ev = first_event(sys, mode0, &back(&(x_minus + dx)), t_start, t_max, opts)?;
            match ev {
                Some(ev) if ev.transition == nominal.transition => Ok(ev),
                other => Err(Error::EventOrderChanged {
                    expected: Some(nominal.transition),
                    found: other.map(|e| e.transition),
                }),
            }
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let t_f = runs
        .iter()
        .map(|e| e.t_event)
        .fold(nominal.t_event, f64::max)
        + 10.0 * opts.tol_t;
    let to = nominal.to;
    let at_tf = |ev: &EventRecord| flow_mode(sys, to, ev.t_event, &ev.x_plus, t_f, opts.step);
    let x_nom = at_tf(&nominal);
    let pull = variational_flow(sys, to, nominal.t_event, &nominal.x_plus, t_f, opts)?
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("post-event flow is singular".into()))?;
    let deltas = runs.iter().map(|ev| &pull * (at_tf(ev) - &x_nom)).collect();
    Ok(PerturbedJumps { nominal, deltas })
}

/// Saltation matrix by central differences of simulated executions through
/// the event at `(t_minus, x_minus)`, with perturbations of size `h` along
/// each coordinate of the pre-event state.
pub fn numeric_saltation(
    sys: &HybridSystem,
    mode0: ModeId,
    x_minus: &Vector,
    t_minus: f64,
    h: f64,
    opts: &SimOptions,
) -> Result<Matrix> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step h must be positive, got {h}")));
    }
    let n = x_minus.len();
    let dxs: Vec<Vector> = (0..n)
        .flat_map(|i| {
            let e = Vector::from_fn(n, |k, _| if k == i { h } else { 0.0 });
            [e.clone(), -e]
        })
        .collect();
    let jumps = perturbed_jumps(sys, mode0, x_minus, t_minus, &dxs, opts)?;
    let m = sys.dim(jumps.nominal.to);
    let mut xi = Matrix::zeros(m, n);
    for i in 0..n {
        let col = (&jumps.deltas[2 * i] - &jumps.deltas[2 * i + 1]) / (2.0 * h);
        xi.set_column(i, &col);
    }
    Ok(xi)
}

/// Distance between the true post-event perturbation produced by
/// pre-event perturbation `dx` and its first-order prediction `xi dx`.
pub fn first_order_residual(
    sys: &HybridSystem,
    mode0: ModeId,
    x_minus: &Vector,
    t_minus: f64,
    xi: &Matrix,
    dx: &Vector,
    opts: &SimOptions,
) -> Result<f64> {
    let jumps = perturbed_jumps(sys, mode0, x_minus, t_minus, std::slice::from_ref(dx), opts)?;
    Ok((&jumps.deltas[0] - xi * dx).norm())
}

/// Central-difference Jacobian of the simulated hybrid flow from
/// `(t0, x0)` to `t1`. Every perturbed run must reproduce the nominal
/// event sequence.
pub fn fd_flow_jacobian(
    sys: &HybridSystem,
    mode0: ModeId,
    x0: &Vector,
    t_span: (f64, f64),
    h: f64,
    opts: &SimOptions,
) -> Result<Matrix> {
    let nominal = simulate(sys, mode0, x0, t_span, opts)?;
    let expected = nominal.event_sequence();
    let n = x0.len();
    let runs: Vec<Result<Vector>> = (0..2 * n)
        .into_par_iter()
        .map(|k| {
            let sign = if k % 2 == 0 { h } else { -h };
            let mut x = x0.clone();
            x[k / 2] += sign;
            let traj = simulate(sys, mode0, &x, t_span, opts)?;
            let found = traj.event_sequence();
            if found != expected {
                let first_diff = found
                    .iter()
                    .zip(expected.iter())
                    .position(|(a, b)| a != b)
                    .unwrap_or(expected.len().min(found.len()));
                return Err(Error::EventOrderChanged {
                    expected: expected.get(first_diff).copied(),
                    found: found.get(first_diff).copied(),
                });
            }
            Ok(traj.final_state().clone())
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let m = nominal.final_state().len();
    let mut jac = Matrix::zeros(m, n);
    for i in 0..n {
        jac.set_column(i, &((&runs[2 * i] - &runs[2 * i + 1]) / (2.0 * h)));
    }
    Ok(jac)
}
