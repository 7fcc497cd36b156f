//! Small-scale mixed-integer linear programming.
//!
//! A bounded dual simplex on a dense tableau solves LP relaxations and
//! branch-and-bound enforces integrality. Problems are expected to be desk
//! sized (a few thousand columns at most) with finite bounds on every column.

mod branch;
mod error;
pub mod mps;
mod presolve;
mod problem;
mod simplex;

pub use branch::{solve_milp, BranchRule, MilpOptions, MilpResult, MilpStatus, NodeTrace, SolveStats};
pub use error::MilpError;
pub use presolve::tighten_integer_bounds;
pub use problem::{Column, Problem, Row, RowSense, Sense};
pub use simplex::{solve_lp, DualSimplex, LpOptions, LpResult, LpStatus};
