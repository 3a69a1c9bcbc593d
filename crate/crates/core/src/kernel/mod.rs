//! Log-barrier interior-point solver for the convex programs produced by each
//! successive convex approximation step.

mod problem;
mod solver;

pub use problem::{Affine, Constraint, ConvexSubproblem, LmiBlock, Perspective, SparseHermitian};
pub use solver::{solve_subproblem, solve_with_options, SolverOptions, SolverReport, SolverStatus};
