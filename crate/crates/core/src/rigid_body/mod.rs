//! Rigid bodies with a single unilateral contact, modeled as an index-1
//! DAE in each contact mode.

mod build;
mod closed_form;
mod model;
mod structure;

pub use build::{approach_rate, build_hybrid_system, cone_guard, slip_guard};
pub use closed_form::{closed_form, closed_form_saltation};
pub use model::{
    constraint_forces, dagger_blocks, impact_impulse, impact_reset, impact_reset_jacobian,
    impact_velocity_map, mode_dynamics, projection_jacobian, solve_mode, ConstraintForces,
    ContactMode, DaggerBlocks, InputFn, ModeSolution, RigidBodyModel, EPS_SLIDE,
};
pub use structure::{
    analyze_structure, block_eigenspaces, expected_properties, EigenSpace, ExpectedProperties,
    SaltationStructure,
};
