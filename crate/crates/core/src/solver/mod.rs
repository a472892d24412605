//! Optimization kernels: integer inflow QP and signal-plan search.

pub mod miqp;
pub mod qp;
pub mod search;

pub use miqp::{solve_integer_qp, IntegerQp, IntegerSolution};
pub use qp::{
    solve_relaxation, solve_relaxation_from, ActiveConstraint, QuadProgram, RelaxedSolution,
};
pub use search::{
    min_violation_margins, search_signal_plan, PlanSearchProblem, SearchMode, SearchOutcome,
};
