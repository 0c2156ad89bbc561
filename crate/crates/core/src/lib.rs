//! Nuclear-norm matrix completion with a block of entries missing not at
//! random: phase-transition and worst-case RMSE theory, the free-probability
//! spectral law behind it, a convex solver, and a seeded experiment harness.

pub mod cli;
pub mod config;
pub mod equivalence;
pub mod error;
pub mod freeprob;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod output;
pub mod plot;
pub mod quadrature;
pub mod rmse;
pub mod solver;

pub use error::{Error, Result};
