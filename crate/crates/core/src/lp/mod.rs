//! The occupation-measure linear program.
//!
//! Substituting `x_{k,m} = π_k f_{k,m}` turns the joint choice of policy and
//! stationary law into a linear program: minimize average queue length
//! subject to a power budget, global balance across every cut `{< k} | {≥ k}`
//! and normalization.

mod mps;
mod occupation;
pub mod simplex;

pub use mps::write_mps;
pub use occupation::{
    build_lp, occupation_measure, recover_policy, solve_budget, solve_lp, sweep, LpProblem,
    LpSolution, SweepPoint,
};
pub use simplex::{
    Certificate, LinearProgram, LpStatus, Relation, SimplexOptions, SimplexSolution,
};
