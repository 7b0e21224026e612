//! Gromov-Wasserstein discrepancy, its gradient, the Frank-Wolfe solver,
//! and the bottleneck variant.

mod bottleneck;
mod objective;
mod solver;

pub use bottleneck::gw_infinity;
pub use objective::{gw_discrepancy, gw_gradient, gw_gradient_direct, gw_objective, PenaltyKind};
pub use solver::{
    initial_couplings, line_search_step, solve_gw, solve_gw_from, GwConfig, GwSolveResult,
    TraceEntry,
};
