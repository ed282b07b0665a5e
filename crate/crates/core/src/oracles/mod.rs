//! Brute-force verifiers for the analytic sensitivity objects.

mod cost;
mod jump;
mod monte_carlo;
mod report;
mod suite;

pub use cost::{brute_force_cost, CostBreakdown};
pub use jump::{first_order_residual, fd_flow_jacobian, flow_mode, numeric_saltation};
pub use monte_carlo::{monte_carlo_covariance, sample_normal, MonteCarloCovariance, MAX_SPLIT_FRACTION};
pub use report::OracleReport;
pub use suite::{builtin_scenarios, run_suite, Scenario, SuiteOptions, VerifyReport};
