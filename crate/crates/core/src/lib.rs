//! Minimal-energy state transfer for linear port-Hamiltonian systems.
//!
//! The crate builds the optimality pencil of the transfer problem, decides
//! its regularity through several independent criteria, regularises the cost
//! with a rank-minimal weight when necessary, and solves the resulting
//! boundary value problem in closed form through Drazin inverses.

pub mod dae;
pub mod error;
pub mod linalg;
pub mod pencil;
pub mod regularize;
pub mod system;
pub mod zoo;

pub use error::{Error, Result};
pub use linalg::{Mat, Subspace, C64};
pub use system::{CostPerturbation, Field, PHSystem, Trajectory};
