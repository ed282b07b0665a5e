//! Hybrid dynamical systems: modes, guards, resets and event-driven simulation.

mod integrator;
mod sim;
mod types;
mod validate;

pub use integrator::{rk4_step, rk4_variational_step};
pub(crate) use integrator::grid_time;
pub(crate) use sim::simulate_prevalidated;
pub use sim::{
    event_at, integrate_segment, locate_event, simulate, simulate_until, simulate_until_return,
    Bracket, EventRecord, HybridTrajectory, LocatedEvent, Segment, SegmentOutcome, SimOptions,
};
pub use types::{
    FieldFn, GuardSpec, HybridSystem, MatrixFn, Mode, ModeId, ResetSpec, ScalarFn,
    TransitionSpec, VectorFieldSpec,
};
pub use validate::{validate_system, Diagnostic};
