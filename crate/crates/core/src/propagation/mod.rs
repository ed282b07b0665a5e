//! Linearized flows, monodromy, covariance and value-function propagation
//! along hybrid trajectories.

mod covariance;
mod flow;
mod lqr;
mod monodromy;

pub use covariance::{propagate_covariance, propagate_covariance_with, CovarianceState, JumpRule};
pub use flow::{fundamental_matrix, variational_flow, variational_flow_with_state, FundamentalMatrix};
pub use lqr::{hybrid_lqr, riccati_jump, rollout, GridRollout, LqrProblem, LqrSolution, ModeMatrixFn, ValueState};
pub use monodromy::{classify, monodromy, periodic_orbit, MonodromyReport, PeriodSpec, Stability, TOL_STAB};
