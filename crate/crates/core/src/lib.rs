//! Rough-path calculus, pathwise optimal control and parameter-robust Kalman-Bucy filtering.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod control;
pub mod error;
pub mod filter;
pub mod io;
pub mod paths;
pub mod quadrature;
pub mod rde;
pub mod rough;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/rough-paths.md")]
    mod rough_paths {}
    #[doc = include_str!("../../../book/src/rde.md")]
    mod rde {}
    #[doc = include_str!("../../../book/src/control.md")]
    mod control {}
    #[doc = include_str!("../../../book/src/filtering.md")]
    mod filtering {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
