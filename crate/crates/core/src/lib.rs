//! Clustering generalisation-risk laboratory: center and subspace clustering
//! objectives, EM solvers, dimension-reduction and net probes, complexity
//! estimators, a lower-bound hard instance, and the excess-risk harness.

// `!(x > 0.0)` style guards are kept on purpose: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod complexity;
pub mod error;
pub mod fit;
pub mod hard;
pub mod harness;
pub mod ingest;
pub mod linalg;
pub mod nets;
pub mod objectives;
pub mod reduction;
pub mod rng;
pub mod seeding;
pub mod selftest;
pub mod solvers;
pub mod table;

pub use error::{Error, Result};
