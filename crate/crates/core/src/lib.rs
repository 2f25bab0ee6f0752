//! Solvers for `max f(x)` subject to `a <= x <= g(x)` with a monotone `g`.
//!
//! The optimum is the greatest fixed point `x+` of `g` below the start
//! point and does not depend on `f`. [`lattice`] holds the generic
//! fixed-point and selective-update solvers, [`linear`] the
//! greatest-lower-bound-of-affine subclass, [`forge`] instance generators,
//! [`oracle`] reference solutions and [`bench`] the sweep harness.

pub mod bench;
pub mod forge;
pub mod lattice;
pub mod linear;
pub mod oracle;
pub mod queue;
pub mod sparse;

pub use lattice::{
    error_bound, fixed_point_solve, residual, selective_update_solve, selective_update_with,
    DependencyGraph, FnMap, GenericProblem, LoopObserver, Method, MonotoneMap, Objective, OpCounts,
    SolveError, SolveOptions, SolveReport,
};
pub use linear::{
    selective_update_linear, selective_update_preconditioned, solve_linear, solve_linear_observed,
    LinearGlbProblem, PieceData,
};
pub use queue::{PolicyQueue, PolicyTag};
