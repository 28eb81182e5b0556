//! Expected-count bounds for budget-restricted sums of nonnegative random
//! variables.
//!
//! Given `n` variables with marginal laws `F_k` and a budget `s`, let
//! `N(n,s)` be the largest number of them whose sum stays within `s`. This
//! crate solves the threshold equation `Σ n_k ∫_0^t x dF_k(x) = s`, evaluates
//! the bound `E N(n,s) ≤ Σ n_k F_k(t)` and its refinements, and checks them
//! against exact and Monte Carlo ground truth. It also solves the sequential
//! knapsack and monotone subsequence problems by value iteration, and the
//! point-process and tiling applications of the bound.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bound;
pub mod distributions;
pub mod dp;
pub mod error;
pub mod oracle;
pub mod point_process;
pub mod quadrature;
pub mod rng;
pub mod root;
pub mod tiling;

pub use bound::{
    brs_bound, corollary_bound, refined_bound, solve_brs_equation, BoundReport, Component,
    MixtureModel, ThresholdSolution,
};
pub use distributions::{DistributionSpec, NumericDensity};
pub use error::{BrsError, Result};
