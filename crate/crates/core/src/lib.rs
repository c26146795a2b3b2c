//! Structure analysis, consistent initialization and singular-perturbation
//! approximation for index-1 nonlinear differential-algebraic equations
//! `E(x)ẋ = F(x)`.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod jumps;
pub mod model;
pub mod numkit;
pub mod perturbation;

pub use error::{Error, Result};
