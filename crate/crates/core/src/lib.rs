//! Resolution-optimal motion planning for bevel-tip steerable needles.
//!
//! The planner searches a multi-resolution lattice of constant-curvature
//! motion primitives, ordering a rank window by cost-to-come plus an
//! admissible heuristic and pruning near-duplicate nodes only when the
//! retained node is no more expensive.

pub mod environment;
pub mod error;
pub mod guidance;
pub mod harness;
pub mod kinematics;
pub mod lattice;
pub mod problem;
pub mod rrt;
pub mod search;
pub mod theory;

pub use nalgebra;

pub use environment::{generate_scenario, load_env, save_env, Environment, ScenarioSpec};
pub use error::{Error, Result};
pub use kinematics::{apply_primitive, MotionPrimitive, Pose, Trajectory, Vec3};
pub use problem::{CostKind, PlanningProblem, ProblemSpec};
pub use search::{plan, Mode, PlanResult, PlannerConfig};
