//! Budgeted classification with learned sensor-acquisition trees.
//!
//! The pipeline turns a labeled tabular dataset plus a priced sensor layout
//! into an adaptive decision system:
//!
//! 1. [`subsets`] greedily picks sensor subsets that trade classification
//!    error against acquisition cost.
//! 2. [`tree`] arranges the subsets into a binary tree by intersection
//!    clustering and derives the path matrices used everywhere downstream.
//! 3. [`logistic`] trains the fixed per-leaf classifiers.
//! 4. [`risk`] computes per-example savings and the reformulated
//!    (max-of-sums) empirical risk together with its convex surrogate.
//! 5. [`lp`] assembles the surrogate minimization as a linear program and
//!    [`simplex`] solves it, yielding the internal decision functions.
//! 6. [`eval`] executes the trained system on held-out data and traces
//!    error-vs-budget curves, including a myopic baseline.
//!
//! [`model`] serializes the whole system as a single versioned JSON
//! document and [`pipeline`] wires the stages together for the CLI.

pub mod data;
pub mod error;
pub mod eval;
pub mod logistic;
pub mod lp;
pub mod model;
pub mod pipeline;
pub mod risk;
pub mod simplex;
pub mod subsets;
pub mod tree;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
