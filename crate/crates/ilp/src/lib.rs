//! Optimization engine used by the satellite scheduler.
//!
//! Everything here works on small dense-ish instances (a few hundred
//! variables at most) and is fully deterministic: identical inputs give
//! bit-identical results.
//!
//! - [`solve_lp`]: two-phase primal simplex on a dense tableau.
//! - [`solve_mip`]: best-first branch-and-bound over the LP relaxation.
//! - [`brute_force_mip`]: exhaustive enumeration, used as a test oracle.
//! - [`hungarian`]: maximum-weight bipartite matching.
//! - [`mwis_exact`]: exact maximum-weight independent set.

mod error;
mod hungarian;
mod lp;
mod mip;
mod mwis;
mod simplex;

pub use error::IlpError;
pub use hungarian::{hungarian, Matching};
pub use lp::{max_violation, Constraint, LinearProgram, MipProblem, Relation, SolveResult, Status};
pub use mip::{brute_force_mip, solve_mip, BRUTE_FORCE_LIMIT};
pub use mwis::{mwis_exact, IndependentSet};
pub use simplex::solve_lp;

/// Tolerance used when deciding whether a relaxation value is integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

/// Tolerance used for feasibility checks on returned assignments.
pub const FEASIBILITY_TOL: f64 = 1e-7;
