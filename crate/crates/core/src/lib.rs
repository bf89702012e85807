//! Simultaneous optimal control and actuator design for semilinear
//! parabolic equations, with the Kuramoto–Sivashinsky equation and a 2-D
//! nonlinear heat equation as concrete models.

pub mod adjoint;
pub mod error;
pub mod forward;
pub mod grid_ops;
pub mod models;
pub mod optimizer;
pub mod riccati;

pub use error::{Error, Result};
