//! Probability functions `φ(x) = P[g_i(x, ξ) <= 0, i = 1..s]` of Gaussian
//! vectors, their enlargements and gradients, computed through the
//! spherical-radial decomposition, plus a trust-region SLP solver for
//! chance-constrained problems.

pub mod case_study;
pub mod config;
pub mod error;
pub mod gaussian_radial;
pub mod lp;
pub mod oracles;
pub mod prob;
pub mod radial;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
