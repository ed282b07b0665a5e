use serde::Serialize;

use crate::error::{Error, Result};
use crate::hybrid::{grid_time, rk4_variational_step, HybridSystem, HybridTrajectory, ModeId, SimOptions};
use crate::linalg::{is_finite_mat, serde_rows, Matrix, Vector};
use crate::saltation::{saltation, SaltationResult};

/// Variational flow `A(t1, t0)` of one mode along the trajectory from
/// `(t0, x0)`, on the same RK4 grid the simulator uses. Also returns the
/// end state.
pub fn variational_flow_with_state(
    sys: &HybridSystem,
    mode: ModeId,
    t0: f64,
    x0: &Vector,
    t1: f64,
    opts: &SimOptions,
) -> Result<(Matrix, Vector)> {
    let n = sys.dim(mode);
    if x0.len() != n {
        return Err(Error::dims("variational flow state", n, x0.len()));
    }
    if t1 < t0 {
        return Err(Error::InvalidParameter(format!(
            "variational flow backwards in time ({t0} -> {t1})"
        )));
    }
    let field = &sys.mode(mode).field;
    let mut m = Matrix::identity(n, n);
    let mut x = x0.clone();
    let mut t = t0;
    let mut k = 0;
    while t < t1 {
        k += 1;
        let t_new = grid_time(t0, opts.step, k, t1);
        let (xn, mn) = rk4_variational_step(field, t, &x, &m, t_new - t);
        x = xn;
        m = mn;
        t = t_new;
    }
    if !is_finite_mat(&m) {
        return Err(Error::NonFiniteState { mode: mode.0, t });
    }
    Ok((m, x))
}

pub fn variational_flow(
    sys: &HybridSystem,
    mode: ModeId,
    t0: f64,
    x0: &Vector,
    t1: f64,
    opts: &SimOptions,
) -> Result<Matrix> {
    variational_flow_with_state(sys, mode, t0, x0, t1, opts).map(|(m, _)| m)
}

#[derive(Debug, Clone, Serialize)]
pub struct FundamentalMatrix {
    #[serde(with = "serde_rows")]
    pub phi: Matrix,
    /// Per-segment variational flows, in time order.
    #[serde(skip)]
    pub segment_flows: Vec<Matrix>,
    pub saltations: Vec<SaltationResult>,
}

/// Composition `A_K Xi_K ... Xi_1 A_0` along a hybrid trajectory.
pub fn fundamental_matrix(
    sys: &HybridSystem,
    traj: &HybridTrajectory,
    opts: &SimOptions,
) -> Result<FundamentalMatrix> {
    let mut phi: Option<Matrix> = None;
    let mut segment_flows = Vec::with_capacity(traj.segments.len());
    let mut saltations = Vec::with_capacity(traj.events.len());
    for (k, seg) in traj.segments.iter().enumerate() {
        let a = variational_flow(
            sys,
            seg.mode,
            seg.times[0],
            &seg.states[0],
            *seg.times.last().unwrap(),
            opts,
        )?;
        phi = Some(match phi {
            None => a.clone(),
            Some(p) => &a * p,
        });
        segment_flows.push(a);
        if let Some(ev) = traj.events.get(k) {
            let s = saltation(sys, ev, opts)?;
            phi = Some(&s.xi * phi.unwrap());
            saltations.push(s);
        }
    }
    Ok(FundamentalMatrix {
        phi: phi.unwrap_or_else(|| Matrix::zeros(0, 0)),
        segment_flows,
        saltations,
    })
}
