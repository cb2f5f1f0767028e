//! Criticality measures, reference-mesh surrogates and error budgets for
//! composite optimization problems with piecewise constant controls on the
//! unit interval.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod criticality;
pub mod error;
pub mod fe_space;
pub mod mesh;
pub mod objective;
pub mod pde;
pub mod problems;
pub mod regularizer;
pub mod solvers;
pub mod study;
pub mod verify;

pub use error::{Error, Result};
pub use fe_space::{CellFn, NodalFn, SampledFn};
pub use mesh::Mesh1D;
