use serde::Serialize;

use super::integrator::{grid_time, rk4_step};
use super::types::{HybridSystem, ModeId};
use super::validate::validate_system;
use crate::error::{Error, Result};
use crate::linalg::{is_finite_vec, serde_vec, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimOptions {
    /// RK4 step size.
    pub step: f64,
    /// Guard residual accepted at a located event.
    pub tol_g: f64,
    /// Event bracket width accepted at a located event.
    pub tol_t: f64,
    pub max_events: usize,
    /// Events with `D_t g + D_x g F <= -eps_trans` are transversal.
    pub eps_trans: f64,
    /// Minimum guard gradient norm.
    pub eps_grad: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            step: 1e-3,
            tol_g: 1e-10,
            tol_t: 1e-12,
            max_events: 1000,
            eps_trans: 1e-8,
            eps_grad: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Segment {
    pub mode: ModeId,
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EventRecord {
    pub t_event: f64,
    pub transition: usize,
    pub from: ModeId,
    pub to: ModeId,
    #[serde(with = "serde_vec")]
    pub x_minus: Vector,
    #[serde(with = "serde_vec")]
    pub x_plus: Vector,
    pub guard_residual: f64,
    /// `D_t g + D_x g F` at the pre-event state.
    pub transversality: f64,
}

/// A hybrid execution. Segment `k + 1` starts at `events[k]` with the
/// post-reset state; segment `k` ends at the same time with the pre-event state.
#[derive(Debug, Clone)]
pub struct HybridTrajectory {
    pub segments: Vec<Segment>,
    pub events: Vec<EventRecord>,
}

impl HybridTrajectory {
    pub fn t_start(&self) -> f64 {
        self.segments[0].times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.segments.last().unwrap().times.last().unwrap()
    }

    pub fn initial_mode(&self) -> ModeId {
        self.segments[0].mode
    }

    pub fn initial_state(&self) -> &Vector {
        &self.segments[0].states[0]
    }

    pub fn final_mode(&self) -> ModeId {
        self.segments.last().unwrap().mode
    }

    pub fn final_state(&self) -> &Vector {
        self.segments.last().unwrap().states.last().unwrap()
    }

    /// Transition indices in the order they fired.
    pub fn event_sequence(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.transition).collect()
    }
}

/// Sign-change bracket of a transition's guard produced by
/// [`integrate_segment`]. States inside the bracket are reproduced by a
/// single RK4 step from the base sample.
#[derive(Debug, Clone)]
pub struct Bracket {
    pub transition: usize,
    pub t_base: f64,
    pub x_base: Vector,
    pub t_left: f64,
    pub x_left: Vector,
    pub t_right: f64,
    pub x_right: Vector,
}

#[derive(Debug, Clone)]
pub struct SegmentOutcome {
    pub segment: Segment,
    pub bracket: Option<Bracket>,
}

#[derive(Debug, Clone)]
pub struct LocatedEvent {
    pub transition: usize,
    pub t_event: f64,
    pub x_minus: Vector,
    pub guard_residual: f64,
    pub transversality: f64,
}

fn guard_values(sys: &HybridSystem, outs: &[usize], t: f64, x: &Vector) -> Vec<f64> {
    outs.iter()
        .map(|&i| sys.transitions[i].guard.eval(t, x))
        .collect()
}

fn state_at(sys: &HybridSystem, mode: ModeId, t_base: f64, x_base: &Vector, t: f64) -> Vector {
    if t == t_base {
        x_base.clone()
    } else {
        rk4_step(&sys.mode(mode).field, t_base, x_base, t - t_base)
    }
}

fn ensure_finite(x: &Vector, mode: ModeId, t: f64) -> Result<()> {
    if is_finite_vec(x) {
        Ok(())
    } else {
        Err(Error::NonFiniteState { mode: mode.0, t })
    }
}

/// Integrate in `mode` from `(t0, x0)` until `t_max` or the first guard
/// sign change. Crossings that complete before `armed_after` are ignored.
pub fn integrate_segment(
    sys: &HybridSystem,
    mode: ModeId,
    t0: f64,
    x0: &Vector,
    t_max: f64,
    armed_after: f64,
    opts: &SimOptions,
) -> Result<SegmentOutcome> {
    ensure_finite(x0, mode, t0)?;
    let field = &sys.mode(mode).field;
    let outs = sys.outgoing(mode);
    let mut seg = Segment {
        mode,
        times: vec![t0],
        states: vec![x0.clone()],
    };
    let mut t = t0;
    let mut x = x0.clone();
    let mut g_prev = guard_values(sys, &outs, t, &x);
    let mut k = 0usize;
    while t < t_max {
        k += 1;
        let t_new = grid_time(t0, opts.step, k, t_max);
        let x_new = rk4_step(field, t, &x, t_new - t);
        ensure_finite(&x_new, mode, t_new)?;
        let g_new = guard_values(sys, &outs, t_new, &x_new);
        let triggered: Vec<usize> = if t_new >= armed_after {
            (0..outs.len())
                .filter(|&j| g_prev[j] > 0.0 && g_new[j] <= 0.0)
                .collect()
        } else {
            Vec::new()
        };
        match triggered.len() {
            0 => {}
            1 => {
                let bracket = Bracket {
                    transition: outs[triggered[0]],
                    t_base: t,
                    x_base: x.clone(),
                    t_left: t,
                    x_left: x,
                    t_right: t_new,
                    x_right: x_new,
                };
                return Ok(SegmentOutcome {
                    segment: seg,
                    bracket: Some(bracket),
                });
            }
            _ => {
                let bracket = split_simultaneous(
                    sys, mode, &outs, t, &x, &g_prev, t_new, &x_new, &g_new, triggered, opts,
                )?;
                return Ok(SegmentOutcome {
                    segment: seg,
                    bracket: Some(bracket),
                });
            }
        }
        t = t_new;
        x = x_new;
        g_prev = g_new;
        seg.times.push(t);
        seg.states.push(x.clone());
    }
    Ok(SegmentOutcome {
        segment: seg,
        bracket: None,
    })
}

/// Bisect a step in which several guards changed sign until only the
/// earliest one remains in the bracket.
#[allow(clippy::too_many_arguments)]
fn split_simultaneous(
    sys: &HybridSystem,
    mode: ModeId,
    outs: &[usize],
    t_base: f64,
    x_base: &Vector,
    g_base: &[f64],
    t_step: f64,
    x_step: &Vector,
    g_step: &[f64],
    mut cands: Vec<usize>,
    opts: &SimOptions,
) -> Result<Bracket> {
    let (mut ta, mut xa, mut ga) = (t_base, x_base.clone(), g_base.to_vec());
    let (mut tb, mut xb, mut gb) = (t_step, x_step.clone(), g_step.to_vec());
    let make = |j: usize, ta: f64, xa: &Vector, tb: f64, xb: &Vector| Bracket {
        transition: outs[j],
        t_base,
        x_base: x_base.clone(),
        t_left: ta,
        x_left: xa.clone(),
        t_right: tb,
        x_right: xb.clone(),
    };
    loop {
        if tb - ta <= opts.tol_t {
            return Err(Error::AmbiguousEvent {
                t: ta,
                transitions: cands.iter().map(|&j| outs[j]).collect(),
            });
        }
        let tm = ta + 0.5 * (tb - ta);
        if tm <= ta || tm >= tb {
            return Err(Error::AmbiguousEvent {
                t: ta,
                transitions: cands.iter().map(|&j| outs[j]).collect(),
            });
        }
        let xm = state_at(sys, mode, t_base, x_base, tm);
        ensure_finite(&xm, mode, tm)?;
        let gm = guard_values(sys, outs, tm, &xm);
        let left: Vec<usize> = cands
            .iter()
            .copied()
            .filter(|&j| ga[j] > 0.0 && gm[j] <= 0.0)
            .collect();
        match left.len() {
            1 => return Ok(make(left[0], ta, &xa, tm, &xm)),
            0 => {
                let right: Vec<usize> = cands
                    .iter()
                    .copied()
                    .filter(|&j| gm[j] > 0.0 && gb[j] <= 0.0)
                    .collect();
                if right.len() == 1 {
                    return Ok(make(right[0], tm, &xm, tb, &xb));
                }
                ta = tm;
                xa = xm;
                ga = gm;
                cands = right;
            }
            _ => {
                tb = tm;
                xb = xm;
                gb = gm;
                cands = left;
            }
        }
    }
}

/// Bisection on a bracket, followed by the guard regularity and
/// transversality checks. The returned state lies on the pre-event side.
pub fn locate_event(sys: &HybridSystem, b: &Bracket, opts: &SimOptions) -> Result<LocatedEvent> {
    let tr = &sys.transitions[b.transition];
    let mode = tr.from;
    let g = |t: f64, x: &Vector| tr.guard.eval(t, x);
    let (mut lo, mut xlo) = (b.t_left, b.x_left.clone());
    let (mut hi, mut xhi) = (b.t_right, b.x_right.clone());
    let mut glo = g(lo, &xlo);
    let mut ghi = g(hi, &xhi);
    for _ in 0..400 {
        if hi - lo <= opts.tol_t && glo.abs() <= opts.tol_g {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let xm = state_at(sys, mode, b.t_base, &b.x_base, mid);
        ensure_finite(&xm, mode, mid)?;
        let gm = g(mid, &xm);
        if gm > 0.0 {
            lo = mid;
            xlo = xm;
            glo = gm;
        } else {
            hi = mid;
            xhi = xm;
            ghi = gm;
        }
    }
    let (t_event, x_minus, residual) = if glo.abs() <= opts.tol_g {
        (lo, xlo, glo)
    } else if ghi.abs() <= opts.tol_g {
        (hi, xhi, ghi)
    } else {
        return Err(Error::LocalizationFailed {
            transition: b.transition,
            t: lo,
            residual: glo.abs().min(ghi.abs()),
        });
    };

    let grad = tr.guard.gradient(t_event, &x_minus);
    let grad_norm = grad.norm();
    if !(grad_norm >= opts.eps_grad) {
        return Err(Error::DegenerateGuard {
            transition: b.transition,
            t: t_event,
            grad_norm,
        });
    }
    let f = sys.mode(mode).field.eval(t_event, &x_minus);
    let rate = tr.guard.time_derivative(t_event, &x_minus) + grad.dot(&f);
    if !(rate < -opts.eps_trans) {
        return Err(Error::TangentialEvent {
            transition: b.transition,
            t: t_event,
            rate,
        });
    }
    Ok(LocatedEvent {
        transition: b.transition,
        t_event,
        x_minus,
        guard_residual: residual,
        transversality: rate,
    })
}

/// Event record for `transition` at a given pre-event state, without
/// localization or regularity checks.
pub fn event_at(sys: &HybridSystem, transition: usize, t: f64, x_minus: &Vector) -> EventRecord {
    let tr = &sys.transitions[transition];
    let f = sys.mode(tr.from).field.eval(t, x_minus);
    let grad = tr.guard.gradient(t, x_minus);
    EventRecord {
        t_event: t,
        transition,
        from: tr.from,
        to: tr.to,
        x_minus: x_minus.clone(),
        x_plus: tr.reset.apply(t, x_minus),
        guard_residual: tr.guard.eval(t, x_minus),
        transversality: tr.guard.time_derivative(t, x_minus) + grad.dot(&f),
    }
}

pub fn simulate(
    sys: &HybridSystem,
    mode0: ModeId,
    x0: &Vector,
    t_span: (f64, f64),
    opts: &SimOptions,
) -> Result<HybridTrajectory> {
    simulate_until(sys, mode0, x0, t_span, opts, |_| false)
}

/// Simulate until the first event that resets into `mode0`, or `t_max`.
/// The trajectory ends at that event with the post-reset state.
pub fn simulate_until_return(
    sys: &HybridSystem,
    mode0: ModeId,
    x0: &Vector,
    t0: f64,
    t_max: f64,
    opts: &SimOptions,
) -> Result<HybridTrajectory> {
    simulate_until(sys, mode0, x0, (t0, t_max), opts, |e| e.to == mode0)
}

/// Simulate over `t_span`, stopping early after any event for which `stop`
/// returns true.
pub fn simulate_until(
    sys: &HybridSystem,
    mode0: ModeId,
    x0: &Vector,
    t_span: (f64, f64),
    opts: &SimOptions,
    stop: impl Fn(&EventRecord) -> bool,
) -> Result<HybridTrajectory> {
    let diags = validate_system(sys);
    if !diags.is_empty() {
        return Err(Error::InvalidSystem(diags));
    }
    simulate_prevalidated(sys, mode0, x0, t_span, opts, stop)
}

/// [`simulate_until`] for a system that already passed [`validate_system`].
pub(crate) fn simulate_prevalidated(
    sys: &HybridSystem,
    mode0: ModeId,
    x0: &Vector,
    t_span: (f64, f64),
    opts: &SimOptions,
    stop: impl Fn(&EventRecord) -> bool,
) -> Result<HybridTrajectory> {
    if mode0.0 >= sys.modes.len() {
        return Err(Error::InvalidParameter(format!("unknown mode {mode0}")));
    }
    if x0.len() != sys.dim(mode0) {
        return Err(Error::dims("initial state", sys.dim(mode0), x0.len()));
    }
    let (t0, t1) = t_span;
    if !(t1 >= t0) || !(opts.step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "invalid time span ({t0}, {t1}) or step {}",
            opts.step
        )));
    }

    let mut segments = Vec::new();
    let mut events: Vec<EventRecord> = Vec::new();
    let (mut mode, mut t, mut x) = (mode0, t0, x0.clone());
    let mut armed_after = t0;
    loop {
        let out = integrate_segment(sys, mode, t, &x, t1, armed_after, opts)?;
        let mut seg = out.segment;
        let Some(bracket) = out.bracket else {
            segments.push(seg);
            break;
        };
        let loc = locate_event(sys, &bracket, opts)?;
        if loc.t_event <= *seg.times.last().unwrap() {
            seg.times.pop();
            seg.states.pop();
        }
        seg.times.push(loc.t_event);
        seg.states.push(loc.x_minus.clone());
        segments.push(seg);

        if events.len() >= opts.max_events {
            return Err(Error::ZenoSuspected {
                events: events.len() + 1,
                t: loc.t_event,
            });
        }
        let tr = &sys.transitions[loc.transition];
        let x_plus = tr.reset.apply(loc.t_event, &loc.x_minus);
        if x_plus.len() != sys.dim(tr.to) {
            return Err(Error::dims(
                format!("reset of transition {}", loc.transition),
                sys.dim(tr.to),
                x_plus.len(),
            ));
        }
        ensure_finite(&x_plus, tr.to, loc.t_event)?;
        let rec = EventRecord {
            t_event: loc.t_event,
            transition: loc.transition,
            from: tr.from,
            to: tr.to,
            x_minus: loc.x_minus,
            x_plus: x_plus.clone(),
            guard_residual: loc.guard_residual,
            transversality: loc.transversality,
        };
        let halt = stop(&rec);
        events.push(rec);
        mode = tr.to;
        t = loc.t_event;
        x = x_plus;
        armed_after = t + opts.tol_t;
        if halt || t >= t1 {
            segments.push(Segment {
                mode,
                times: vec![t],
                states: vec![x],
            });
            break;
        }
    }
    Ok(HybridTrajectory { segments, events })
}
