use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::kinematics::{MotionPrimitive, Pose};
use crate::problem::PlanningProblem;
use crate::search::{PlanResult, Termination, TracePoint};

/// Spacing of the exported polyline.
pub const POLYLINE_SPACING: f64 = 0.5;

/// JSON document written by `plan`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub problem_digest: String,
    pub config: RunConfig,
    pub found: bool,
    pub start: Pose,
    pub primitives: Vec<MotionPrimitive>,
    pub polyline: Vec<[f64; 3]>,
    pub cost: Option<f64>,
    pub length: Option<f64>,
    pub nodes_expanded: u64,
    pub nodes_generated: u64,
    pub nodes_pruned_duplicate: u64,
    pub nodes_pruned_reach: u64,
    pub nodes_pruned_cost: u64,
    pub nodes_invalid: u64,
    pub terminated: Termination,
    pub trace: Vec<TracePoint>,
    /// Wall or virtual milliseconds, matching the trace.
    pub elapsed_ms: f64,
}

pub fn plan_report(problem: &PlanningProblem, config: &RunConfig, r: &PlanResult) -> PlanReport {
    let (primitives, polyline, length) = match &r.best {
        Some(t) => (
            t.primitives.clone(),
            t.sample(POLYLINE_SPACING)
                .into_iter()
                .map(|(_, x)| [x.p.x, x.p.y, x.p.z])
                .collect(),
            Some(t.length()),
        ),
        None => (Vec::new(), Vec::new(), None),
    };
    PlanReport {
        problem_digest: problem.digest(),
        config: config.clone(),
        found: r.best.is_some(),
        start: problem.x_start,
        primitives,
        polyline,
        cost: r.best_cost,
        length,
        nodes_expanded: r.nodes_expanded,
        nodes_generated: r.nodes_generated,
        nodes_pruned_duplicate: r.nodes_pruned_duplicate,
        nodes_pruned_reach: r.nodes_pruned_reach,
        nodes_pruned_cost: r.nodes_pruned_cost,
        nodes_invalid: r.nodes_invalid,
        terminated: r.terminated,
        trace: r.trace.clone(),
        elapsed_ms: r.elapsed_ms,
    }
}
