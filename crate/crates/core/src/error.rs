use thiserror::Error;

use crate::hybrid::Diagnostic;

/// Errors raised by simulation, sensitivity and verification routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("non-finite state in mode {mode} at t = {t}")]
    NonFiniteState { mode: usize, t: f64 },

    #[error("ambiguous event near t = {t}: transitions {transitions:?} trigger simultaneously")]
    AmbiguousEvent { t: f64, transitions: Vec<usize> },

    #[error("tangential event on transition {transition} at t = {t}: guard rate {rate:e}")]
    TangentialEvent { transition: usize, t: f64, rate: f64 },

    #[error("degenerate guard on transition {transition} at t = {t}: |D_x g| = {grad_norm:e}")]
    DegenerateGuard {
        transition: usize,
        t: f64,
        grad_norm: f64,
    },

    #[error("suspected Zeno execution: {events} events before t = {t}")]
    ZenoSuspected { events: usize, t: f64 },

    #[error("event localization on transition {transition} failed near t = {t}: |g| = {residual:e}")]
    LocalizationFailed {
        transition: usize,
        t: f64,
        residual: f64,
    },

    #[error("invalid hybrid system: {}", format_diagnostics(.0))]
    InvalidSystem(Vec<Diagnostic>),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("trajectory is not periodic: {reason}")]
    NotPeriodic { reason: String },

    #[error("constraint Jacobian is rank deficient (J M^-1 J^T not positive definite)")]
    SingularConstraint,

    #[error("sliding friction direction undefined: |J_t qdot| = {speed:e}")]
    SlidingSingularity { speed: f64 },

    #[error("frictional contact has no consistent normal force (Painleve configuration)")]
    FrictionParadox,

    #[error("input penalty is not positive definite at step {step}")]
    SingularInputPenalty { step: usize },

    #[error("more than one hybrid event inside LQR step {step}")]
    MultipleEventsInStep { step: usize },

    #[error("perturbed run changed event order: expected transition {expected:?}, found {found:?}")]
    EventOrderChanged {
        expected: Option<usize>,
        found: Option<usize>,
    },

    #[error("split distribution: {diverged} of {total} samples took a different event sequence")]
    SplitDistribution { diverged: usize, total: usize },

    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub fn dims(what: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected,
            found,
        }
    }

    pub(crate) fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}
