//! Numerical checks for the approximation and optimality arguments behind
//! the planner, plus an exhaustive lattice oracle.

mod approx;
mod metric;
mod oracle;

pub use approx::{
    cost_bound_check, duty_cycle_approximate, duty_cycle_partitioned, duty_cycle_segment, verify_local_strict,
    verify_piecewise, ApproxReport, CostBoundReport, CostConstants, DutyCycled,
};
pub use metric::{
    action_distance, estimate_lipschitz, lipschitz_ratio, pruning_error_bound, replay_pruning_chain, ChainReplay,
    LipschitzEstimate, LipschitzSetup, LIPSCHITZ_SAFETY,
};
pub use oracle::{brute_force_optimal, DEFAULT_NODE_CAP};
