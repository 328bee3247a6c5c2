//! Kalman–Bucy filtering under parameter uncertainty.
//!
//! The filter of a linear Gaussian model is run forward from a prior, the negative
//! log-posterior of a parameter trajectory is its penalty, and the minimal penalty over
//! trajectories steering the filter to a given `(μ, Σ)` defines a convex expectation on the signal.

mod backward;
mod expectation;
mod kalman;
pub(crate) mod mat;
mod model;
mod penalty;
mod reduced;

pub use backward::*;
pub use expectation::*;
pub use kalman::*;
pub use model::*;
pub use penalty::*;
pub use reduced::*;
