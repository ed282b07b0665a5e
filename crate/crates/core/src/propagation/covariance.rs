use serde::Serialize;

use crate::error::{Error, Result};
use crate::hybrid::{rk4_variational_step, HybridSystem, HybridTrajectory, ModeId, SimOptions};
use crate::linalg::{is_psd, serde_rows, symmetrize, Matrix};
use crate::saltation::saltation;

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceState {
    pub t: f64,
    pub mode: ModeId,
    #[serde(with = "serde_rows")]
    pub sigma: Matrix,
}

/// How covariance is mapped through an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpRule {
    Saltation,
    /// Reset Jacobian only, ignoring the timing correction.
    ResetJacobian,
}

pub fn propagate_covariance(
    sys: &HybridSystem,
    traj: &HybridTrajectory,
    sigma0: &Matrix,
    opts: &SimOptions,
) -> Result<Vec<CovarianceState>> {
    propagate_covariance_with(sys, traj, sigma0, JumpRule::Saltation, opts)
}

/// First-order covariance at every trajectory sample. Events contribute two
/// entries at the same time: pre-event in the source mode and post-event in
/// the target mode.
pub fn propagate_covariance_with(
    sys: &HybridSystem,
    traj: &HybridTrajectory,
    sigma0: &Matrix,
    rule: JumpRule,
    opts: &SimOptions,
) -> Result<Vec<CovarianceState>> {
    let n = traj.initial_state().len();
    if sigma0.shape() != (n, n) {
        return Err(Error::dims("initial covariance", n, sigma0.nrows()));
    }
    let asym = (sigma0 - sigma0.transpose()).amax();
    if asym > 1e-12 * sigma0.amax().max(1.0) || !is_psd(sigma0, 1e-12) {
        return Err(Error::InvalidParameter(
            "initial covariance must be symmetric positive semidefinite".into(),
        ));
    }
    let mut out = Vec::new();
    let mut sigma = symmetrize(sigma0);
    for (k, seg) in traj.segments.iter().enumerate() {
        let field = &sys.mode(seg.mode).field;
        out.push(CovarianceState {
            t: seg.times[0],
            mode: seg.mode,
            sigma: sigma.clone(),
        });
        let dim = seg.states[0].len();
        for i in 1..seg.times.len() {
            let h = seg.times[i] - seg.times[i - 1];
            let (_, a) = rk4_variational_step(
                field,
                seg.times[i - 1],
                &seg.states[i - 1],
                &Matrix::identity(dim, dim),
                h,
            );
            sigma = symmetrize(&(&a * &sigma * a.transpose()));
            out.push(CovarianceState {
                t: seg.times[i],
                mode: seg.mode,
                sigma: sigma.clone(),
            });
        }
        if let Some(ev) = traj.events.get(k) {
            let jump = match rule {
                JumpRule::Saltation => saltation(sys, ev, opts)?.xi,
                JumpRule::ResetJacobian => {
                    sys.transitions[ev.transition]
                        .reset
                        .jacobian(ev.t_event, &ev.x_minus)
                }
            };
            sigma = symmetrize(&(&jump * &sigma * jump.transpose()));
        }
    }
    Ok(out)
}
