//! Saltation matrices and sensitivity propagation for hybrid dynamical systems.

pub mod error;
pub mod export;
pub mod hybrid;
pub mod linalg;
pub mod models;
pub mod oracles;
pub mod propagation;
pub mod rigid_body;
pub mod saltation;

pub use error::{Error, Result};
pub use hybrid::{HybridSystem, HybridTrajectory, ModeId, SimOptions};
pub use linalg::{Matrix, Vector};
