//! Gap invariants of finite ultrametric spaces.
//!
//! The library validates finite (ultra)metric spaces, converts between
//! ultrametrics and proximity dendrograms, evaluates the p-gap functional on
//! normalized two-team weight vectors, and computes the gap invariant of a
//! space at any exponent p — exactly where a closed form exists (p = 0, the
//! p -> infinity asymptote, constancy classification) and by convex
//! optimization over sign orthants otherwise, with a witness in every case.

// Matrix code indexes (i, j) pairs throughout; iterator rewrites would
// obscure the symmetry of the formulas.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod dendrogram;
pub mod metric;
pub mod rational;
pub mod simplex;
pub mod solver;
pub mod testutil;

pub use dendrogram::{DendroTree, Dendrogram};
pub use metric::{ArithmeticMode, FiniteMetric, MetricKind};
pub use simplex::Simplex;
pub use solver::{
    classify, gamma_infinity, gap, gap_curve, gap_oracle, theta, verify_enhanced, ConstancyClass,
    GapResult, SolverError,
};
