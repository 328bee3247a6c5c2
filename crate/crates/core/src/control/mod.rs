//! Pathwise optimal control: cost functionals, HJB solvers and closed-form oracles.

mod dpp;
mod hjb;
mod insider;
mod problem;

pub use dpp::*;
pub use hjb::*;
pub use insider::*;
pub use problem::*;
