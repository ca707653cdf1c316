//! Parallel block-coordinate solvers for `min F(x) + G(x)` with smooth,
//! possibly nonconvex `F` and block-separable convex `G` over a box.

pub mod baselines;
pub mod control;
pub mod error;
pub mod linalg;
pub mod model;
pub mod problems;
pub mod solvers;
pub mod subprob;

pub use baselines::{fista_solve, sparsa_solve, BaselineOptions, BaselineResult};
pub use control::{Merit, SelectionRule, StepMode, StepSchedule};
pub use error::{Error, Result};
pub use model::{BlockStructure, FeasibleSet, ProblemInstance, Regularizer, SmoothOracle};
pub use subprob::ApproximationKind;
pub use solvers::{flexa_solve, gauss_jacobi_solve, gj_selection_solve, solve, Algorithm, RunTrace, SolveResult, SolverConfig, Status};
