//! Numerical calculus on nonlinear flags: nested closed submanifolds of a flat
//! symplectic space, their transgressed forms, current pairings, moment map and
//! Hamiltonian lifting.

pub mod ambient;
pub mod currents;
pub mod error;
pub mod flagmesh;
pub mod linalg;
pub mod par;
pub mod symflag;
pub mod transgression;

pub use error::{Error, Result};
