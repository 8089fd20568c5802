//! Boundary-integral Helmholtz solver for curved plasmonic nanorods.

pub mod asymptotics;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod linalg;
pub mod operators;
pub mod quadrature;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
