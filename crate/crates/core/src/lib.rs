//! Tree-based solver for decoupled forward-backward SDEs.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cart;
pub mod error;
pub mod harness;
pub mod paths;
pub mod problems;
mod rng;
pub mod scalar;
pub mod solver;

pub use error::{FbsdeError, Result};
pub use scalar::Real;

pub type Grid = paths::TimeGrid<f64>;
pub type Grid32 = paths::TimeGrid<f32>;
pub type Ensemble = paths::PathEnsemble<f64>;
pub type Ensemble32 = paths::PathEnsemble<f32>;
pub type Tree = cart::RegressionTree<f64>;
pub type Tree32 = cart::RegressionTree<f32>;
pub type Solution = solver::SolveResult<f64>;
pub type Solution32 = solver::SolveResult<f32>;
