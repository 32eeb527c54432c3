//! The planning query: environment, start pose, goal ball, needle limits
//! and the cost functional.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::guidance::{goal_in_cone, ReachSpec};
use crate::kinematics::{apply_primitive, MotionPrimitive, Pose, Trajectory, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    /// Trajectory length (unit cost everywhere).
    #[default]
    Length,
    /// Integral of the interpolated voxel cost.
    Costmap,
}

fn default_max_turn() -> f64 {
    FRAC_PI_2
}

/// Serializable part of a problem; the environment is stored separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub x_start: Pose,
    pub p_goal: [f64; 3],
    pub tau: f64,
    pub ell_max: f64,
    pub kappa_max: f64,
    #[serde(default)]
    pub cost_kind: CostKind,
    #[serde(default = "default_max_turn")]
    pub max_turn: f64,
}

#[derive(Debug, Clone)]
pub struct PlanningProblem {
    pub env: Arc<Environment>,
    pub x_start: Pose,
    pub p_goal: Vec3,
    pub tau: f64,
    pub ell_max: f64,
    pub kappa_max: f64,
    pub cost_kind: CostKind,
    /// Largest allowed angle between the tip tangent and the goal
    /// direction at every node that is not yet within `tau`.
    pub max_turn: f64,
}

impl PlanningProblem {
    pub fn new(
        env: Arc<Environment>,
        x_start: Pose,
        p_goal: Vec3,
        tau: f64,
        ell_max: f64,
        kappa_max: f64,
        cost_kind: CostKind,
    ) -> Self {
        Self {
            env,
            x_start,
            p_goal,
            tau,
            ell_max,
            kappa_max,
            cost_kind,
            max_turn: FRAC_PI_2,
        }
    }

    pub fn from_spec(env: Arc<Environment>, spec: &ProblemSpec) -> Self {
        Self {
            env,
            x_start: spec.x_start,
            p_goal: Vec3::from(spec.p_goal),
            tau: spec.tau,
            ell_max: spec.ell_max,
            kappa_max: spec.kappa_max,
            cost_kind: spec.cost_kind,
            max_turn: spec.max_turn,
        }
    }

    pub fn spec(&self) -> ProblemSpec {
        ProblemSpec {
            x_start: self.x_start,
            p_goal: [self.p_goal.x, self.p_goal.y, self.p_goal.z],
            tau: self.tau,
            ell_max: self.ell_max,
            kappa_max: self.kappa_max,
            cost_kind: self.cost_kind,
            max_turn: self.max_turn,
        }
    }

    /// Same query started from another pose with a reduced length budget.
    pub fn from_pose(&self, x: Pose, ell_max: f64) -> Self {
        Self {
            x_start: x,
            ell_max,
            ..self.clone()
        }
    }

    /// Checks parameter ranges and that the start is collision-free.
    pub fn check(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.kappa_max > 0.0 && self.ell_max >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need tau > 0, kappa_max > 0, ell_max >= 0 (got {}, {}, {})",
                self.tau, self.kappa_max, self.ell_max
            )));
        }
        if !(self.max_turn > 0.0 && self.max_turn <= FRAC_PI_2) {
            return Err(Error::InvalidArgument("max_turn must lie in (0, π/2]".into()));
        }
        if !self.env.contains(&self.x_start.p) {
            return Err(Error::InvalidStart("start lies outside the workspace".into()));
        }
        if !self.env.is_free(&self.x_start.p) {
            return Err(Error::InvalidStart("start lies inside an inflated obstacle".into()));
        }
        Ok(())
    }

    /// Lower bound on the cost rate.
    pub fn c_min(&self) -> f64 {
        match self.cost_kind {
            CostKind::Length => 1.0,
            CostKind::Costmap => self.env.c_min(),
        }
    }

    /// Upper bound on the cost rate.
    pub fn c_max(&self) -> f64 {
        match self.cost_kind {
            CostKind::Length => 1.0,
            CostKind::Costmap => self.env.c_max(),
        }
    }

    /// Cost of one edge; lookups outside the grid are clamped.
    pub fn edge_cost(&self, x: &Pose, m: &MotionPrimitive) -> f64 {
        match self.cost_kind {
            CostKind::Length => m.delta_ell,
            CostKind::Costmap => self.env.edge_cost_clamped(x, m),
        }
    }

    pub fn trajectory_cost(&self, t: &Trajectory) -> Result<f64> {
        match self.cost_kind {
            CostKind::Length => Ok(t.primitives.iter().map(|m| m.delta_ell).sum()),
            CostKind::Costmap => self.env.trajectory_cost(t),
        }
    }

    pub fn at_goal(&self, p: &Vec3) -> bool {
        (p - self.p_goal).norm() <= self.tau
    }

    pub fn turn_ok(&self, x: &Pose) -> bool {
        goal_in_cone(x, &self.p_goal, self.tau, self.max_turn)
    }

    pub fn reach_spec(&self, remaining: f64) -> ReachSpec {
        ReachSpec {
            kappa_max: self.kappa_max,
            max_turn: self.max_turn,
            remaining_length: remaining,
            tau: self.tau,
        }
    }

    pub fn edge_free(&self, x: &Pose, m: &MotionPrimitive) -> bool {
        self.env.edge_collision_free(x, m, self.kappa_max)
    }

    /// Independent post-hoc check of a plan against every constraint.
    pub fn validate_plan(&self, t: &Trajectory) -> std::result::Result<(), String> {
        if t.start.p != self.x_start.p || t.start.q != self.x_start.q {
            return Err("plan does not start at the start pose".into());
        }
        if t.length() > self.ell_max * (1.0 + 1e-12) + 1e-12 {
            return Err(format!("length {} exceeds {}", t.length(), self.ell_max));
        }
        let mut x = t.start;
        if !self.env.is_free(&x.p) {
            return Err("start is not free".into());
        }
        for (i, m) in t.primitives.iter().enumerate() {
            if !self.turn_ok(&x) {
                return Err(format!("turn constraint violated before primitive {i}"));
            }
            if !(m.kappa >= 0.0 && m.kappa <= self.kappa_max * (1.0 + 1e-12) && m.delta_ell > 0.0) {
                return Err(format!("primitive {i} out of range: {m:?}"));
            }
            if !self.edge_free(&x, m) {
                return Err(format!("primitive {i} collides"));
            }
            x = apply_primitive(&x, m);
        }
        if !self.at_goal(&x.p) {
            return Err(format!("end is {} from the goal", (x.p - self.p_goal).norm()));
        }
        Ok(())
    }

    /// SHA-256 over the environment digest and the query.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.env.digest().as_bytes());
        h.update(serde_json::to_vec(&self.spec()).expect("problem spec serializes"));
        hex::encode(h.finalize())
    }
}
