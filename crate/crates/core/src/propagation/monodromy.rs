use num_complex::Complex64;
use serde::Serialize;

use super::flow::fundamental_matrix;
use crate::error::{Error, Result};
use crate::hybrid::{simulate, simulate_until_return, HybridSystem, HybridTrajectory, ModeId, SimOptions};
use crate::linalg::{serde_complex_vec, serde_rows, sorted_eigenvalues, Matrix, Vector};

/// Multipliers within this distance of the unit circle are marginal.
pub const TOL_STAB: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonodromyReport {
    #[serde(with = "serde_rows")]
    pub phi: Matrix,
    pub period: f64,
    /// Floquet multipliers sorted by descending magnitude.
    #[serde(with = "serde_complex_vec")]
    pub multipliers: Vec<Complex64>,
    #[serde(with = "serde_complex_vec")]
    pub exponents: Vec<Complex64>,
    /// Real parts of the Floquet exponents.
    pub lyapunov: Vec<f64>,
    pub verdict: Stability,
    pub closure_error: f64,
    pub events: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeriodSpec {
    /// Run until the trajectory first resets into its starting mode.
    AutoFromX0 { t_max: f64 },
    Fixed(f64),
}

/// Simulate one candidate period from `(mode0, t0, x0)`.
pub fn periodic_orbit(
    sys: &HybridSystem,
    mode0: ModeId,
    x0: &Vector,
    t0: f64,
    period: PeriodSpec,
    opts: &SimOptions,
) -> Result<HybridTrajectory> {
    match period {
        PeriodSpec::AutoFromX0 { t_max } => {
            let traj = simulate_until_return(sys, mode0, x0, t0, t0 + t_max, opts)?;
            if traj.events.last().map(|e| e.to) != Some(mode0) {
                return Err(Error::NotPeriodic {
                    reason: format!("no return to mode {mode0} within {t_max}"),
                });
            }
            Ok(traj)
        }
        PeriodSpec::Fixed(t) => {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!("period must be positive, got {t}")));
            }
            simulate(sys, mode0, x0, (t0, t0 + t), opts)
        }
    }
}

pub fn classify(multipliers: &[Complex64]) -> Stability {
    let r = multipliers.iter().map(|s| s.norm()).fold(0.0, f64::max);
    if r < 1.0 - TOL_STAB {
        Stability::Stable
    } else if r > 1.0 + TOL_STAB {
        Stability::Unstable
    } else {
        Stability::Marginal
    }
}

/// Monodromy matrix and Floquet data of a closed trajectory. The trajectory
/// must end in its starting mode within `tol_periodic` of its initial state.
pub fn monodromy(
    sys: &HybridSystem,
    traj: &HybridTrajectory,
    tol_periodic: f64,
    opts: &SimOptions,
) -> Result<MonodromyReport> {
    if traj.final_mode() != traj.initial_mode() {
        return Err(Error::NotPeriodic {
            reason: format!(
                "ends in mode {} but starts in mode {}",
                traj.final_mode(),
                traj.initial_mode()
            ),
        });
    }
    let x0 = traj.initial_state();
    let closure_error = (traj.final_state() - x0).norm();
    if closure_error > tol_periodic * x0.norm().max(1.0) {
        return Err(Error::NotPeriodic {
            reason: format!("closure error {closure_error:e} exceeds {tol_periodic:e}"),
        });
    }
    let period = traj.t_end() - traj.t_start();
    if !(period > 0.0) {
        return Err(Error::NotPeriodic {
            reason: "zero-length trajectory".into(),
        });
    }
    let phi = fundamental_matrix(sys, traj, opts)?.phi;
    let multipliers = sorted_eigenvalues(&phi);
    let exponents: Vec<Complex64> = multipliers.iter().map(|s| s.ln() / period).collect();
    let lyapunov = exponents.iter().map(|m| m.re).collect();
    Ok(MonodromyReport {
        verdict: classify(&multipliers),
        phi,
        period,
        multipliers,
        exponents,
        lyapunov,
        closure_error,
        events: traj.events.len(),
    })
}
