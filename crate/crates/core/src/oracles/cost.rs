use serde::Serialize;

use super::jump::flow_mode;
use crate::error::{Error, Result};
use crate::hybrid::{simulate, simulate_until, EventRecord, HybridSystem, ModeId, SimOptions};
use crate::linalg::{Matrix, Vector};
use crate::propagation::{GridRollout, LqrProblem};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub state: f64,
    pub input: f64,
    pub terminal: f64,
    pub total: f64,
}

impl std::ops::Add for CostBreakdown {
    type Output = CostBreakdown;

    fn add(self, o: CostBreakdown) -> CostBreakdown {
        CostBreakdown {
            state: self.state + o.state,
            input: self.input + o.input,
            terminal: self.terminal + o.terminal,
            total: self.total + o.total,
        }
    }
}

/// Deviation of a perturbed state from the nominal one at grid time `t`.
/// When exactly one of the two runs has already taken the next event, the
/// lagging one is carried through that event by its own flow and both are
/// compared in the nominal's current mode.
fn deviation(
    sys: &HybridSystem,
    t: f64,
    nominal: (&Vector, &[EventRecord]),
    perturbed: (ModeId, &Vector, &[EventRecord]),
    horizon: f64,
    opts: &SimOptions,
) -> Result<Vector> {
    let (nx, nev) = nominal;
    let (pm, px, pev) = perturbed;
    let order_changed = |k: usize, found: Option<usize>| Error::EventOrderChanged {
        expected: nev.get(k).map(|e| e.transition),
        found,
    };
    for (k, e) in pev.iter().enumerate().take(nev.len()) {
        if e.transition != nev[k].transition {
            return Err(order_changed(k, Some(e.transition)));
        }
    }
    let x = if pev.len() == nev.len() {
        px.clone()
    } else if pev.len() + 1 == nev.len() {
        // Perturbed run has not jumped yet: run it to its event and flow the
        // post-event state back to `t`.
        let k = pev.len();
        let traj = simulate_until(sys, pm, px, (t, t + horizon), opts, |_| true)?;
        let ev = match traj.events.first() {
            Some(ev) if ev.transition == nev[k].transition => ev,
            other => return Err(order_changed(k, other.map(|e| e.transition))),
        };
        flow_mode(sys, ev.to, ev.t_event, &ev.x_plus, t, opts.step)
    } else if pev.len() == nev.len() + 1 {
        // Perturbed run jumped early: continue its pre-event flow to `t`.
        let ev = pev.last().unwrap();
        flow_mode(sys, ev.from, ev.t_event, &ev.x_minus, t, opts.step)
    } else {
        return Err(order_changed(nev.len().min(pev.len()), pev.get(nev.len()).map(|e| e.transition)));
    };
    if x.len() != nx.len() {
        return Err(Error::dims("perturbed state", nx.len(), x.len()));
    }
    Ok(x - nx)
}

/// Quadratic cost of rolling out `nominal.states[0] + dx0` under the
/// feedback `u_k = -K_k dx_k` on the nominal grid, with the same discrete
/// stage cost the LQR backward pass optimizes.
pub fn brute_force_cost(
    sys: &HybridSystem,
    nominal: &GridRollout,
    problem: &LqrProblem,
    gains: &[Matrix],
    dx0: &Vector,
    opts: &SimOptions,
) -> Result<CostBreakdown> {
    let n = nominal.times.len() - 1;
    if gains.len() != n {
        return Err(Error::dims("gain schedule", n, gains.len()));
    }
    let horizon = nominal.times[n] - nominal.times[0];
    let nom_events: Vec<EventRecord> = nominal.step_events.iter().flatten().cloned().collect();
    let mut nom_count = 0;
    let mut events: Vec<EventRecord> = Vec::new();
    let (mut mode, mut x) = (nominal.modes[0], &nominal.states[0] + dx0);
    let mut cost = CostBreakdown::default();
    for k in 0..=n {
        let t = nominal.times[k];
        let dx = deviation(
            sys,
            t,
            (&nominal.states[k], &nom_events[..nom_count]),
            (mode, &x, &events),
            horizon,
            opts,
        )?;
        if k == n {
            cost.terminal = (dx.transpose() * &problem.p_terminal * &dx)[0];
            break;
        }
        let dt = nominal.times[k + 1] - t;
        let u = -(&gains[k] * &dx);
        let q = (problem.q)(t, nominal.modes[k]);
        let v = (problem.v)(t, nominal.modes[k]);
        cost.state += (dx.transpose() * q * &dx)[0] * dt;
        cost.input += (u.transpose() * v * &u)[0] * dt;

        let sys_u = sys.with_input(problem.b.as_ref(), &u, t);
        let traj = simulate(&sys_u, mode, &x, (t, nominal.times[k + 1]), opts)?;
        if traj.events.len() > 1 {
            return Err(Error::MultipleEventsInStep { step: k });
        }
        mode = traj.final_mode();
        x = traj.final_state().clone();
        events.extend(traj.events);
        if nominal.step_events[k].is_some() {
            nom_count += 1;
        }
    }
    cost.total = cost.state + cost.input + cost.terminal;
    Ok(cost)
}
