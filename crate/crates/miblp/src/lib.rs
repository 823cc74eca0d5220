//! Solver library for mixed-integer bilevel linear programs (MIBLPs) in which
//! continuous and integer variables appear at both levels and upper-level
//! constraints may involve lower-level variables (connecting constraints).
//!
//! The solver rewrites the bilevel program as a single-level mixed-integer
//! program whose per-response constraint blocks are activated only when the
//! current upper-level decision leaves that lower-level integer response
//! feasible (a projection test embedded through an LP and its KKT system),
//! and explores those blocks lazily with a column-and-constraint generation
//! loop that maintains certified lower and upper bounds.
//!
//! Everything is self-contained: the crate carries its own LP simplex engine,
//! branch-and-bound, big-M compilation of complementarity and indicator
//! constraints, exact brute-force oracles for cross-checking, and generators
//! for two benchmark instance families.
//!
//! See the `examples/` directory for runnable entry points per capability,
//! and the `miblp` binary for the command-line front end.

pub mod ccg;
pub mod fixtures;
pub mod gen;
pub mod milp;
pub mod model;
pub mod oracle;
pub mod reform;
pub mod subprob;

pub use milp::{MilpModel, MilpResult, MilpStatus, SolverTolerances};
pub use model::{BilevelSolution, MiblpInstance, ValidationReport};
