//! Rotor-orientation optimization for omnidirectional multirotors.
//!
//! The pipeline: a [`chassis::Chassis`] fixes rotor positions; [`wrench`]
//! scores a set of thrust directions by the singular values of the
//! dimensionless grasp matrix; [`optimizer`] finds the distinct local minima
//! over the constraint torus; [`topology`] reconstructs the structure of the
//! resulting solution families.

pub mod chassis;
pub mod error;
pub mod manifold;
pub mod optimizer;
pub mod symmetry;
pub mod topology;
pub mod wrench;

pub use error::{Error, Result};
