//! Regularized incompressible inhomogeneous Navier-Stokes–Vlasov solver on a
//! 2D box with a 2D velocity space, plus the verification harness that checks
//! its a priori estimates, conservation laws and weak formulations.

pub mod density;
pub mod engine;
pub mod error;
pub mod fluid;
pub mod grid;
pub mod initial;
pub mod io;
pub mod kinetic;
pub mod linalg;
pub mod mollify;
pub mod projection;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Grid2D, NodeField, ScalarField, VectorField};
