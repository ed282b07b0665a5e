//! Built-in reference systems and the affine JSON loader.

mod affine;
mod ball_drop;
mod mechanisms;
mod simple;

pub use affine::{
    affine_bounce_benchmark, load_affine, AffineMode, AffineModel, AffineTransition, AFFINE_FORMAT,
};
pub use ball_drop::{ball_drop, omega_slide, omega_stick, thrust_pulse, BallDropParams, BallFriction};
pub use mechanisms::{coulomb_ball, two_link_arm, CoulombBallParams, TwoLinkParams};
pub use simple::{bouncing_ball, constant_flow_example, constant_flow_two_mode};
