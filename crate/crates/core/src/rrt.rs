//! Anytime RRT baseline that grows a tree of constant-curvature steps in
//! the workspace and connects every new node straight to the goal.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guidance::{direct_goal_connect, goal_reachable, ReachSpec};
use crate::kinematics::{apply_primitive, MotionPrimitive, Pose, Trajectory, Vec3};
use crate::problem::PlanningProblem;
use crate::search::{Clock, PlanResult, Termination, TracePoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrtConfig {
    /// Probability of sampling the goal point.
    pub goal_bias: f64,
    /// Longest single extension.
    pub step_ell: f64,
    pub seed: u64,
    pub time_budget_ms: f64,
    /// Iterations per virtual millisecond; `None` uses wall time.
    pub virtual_clock: Option<f64>,
    /// Optional hard stop independent of the clock.
    pub max_iterations: Option<u64>,
}

impl Default for RrtConfig {
    fn default() -> Self {
        Self {
            goal_bias: 0.05,
            step_ell: 20.0,
            seed: 0,
            time_budget_ms: 10_000.0,
            virtual_clock: None,
            max_iterations: None,
        }
    }
}

impl RrtConfig {
    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(Error::InvalidArgument("goal_bias must lie in [0, 1]".into()));
        }
        if !(self.step_ell > 0.0) || !(self.time_budget_ms >= 0.0) {
            return Err(Error::InvalidArgument("need step_ell > 0 and a non-negative budget".into()));
        }
        if let Some(r) = self.virtual_clock {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument("virtual clock rate must be positive".into()));
            }
        }
        Ok(())
    }
}

/// One extension from `from` toward `target`. The roll turns the curving
/// plane onto the target, the curvature is that of the arc through the
/// target clamped to `κ_max`, and the length stops at the target (or the
/// point of closest approach when clamped) or after `step_ell`.
/// Returns `None` when the target is behind the tip or coincides with it.
pub fn steer(from: &Pose, target: &Vec3, kappa_max: f64, step_ell: f64) -> Option<MotionPrimitive> {
    let d = from.q.inverse() * (target - from.p);
    let a = d.z;
    let b = d.x.hypot(d.y);
    if d.norm() < 1e-12 || b.atan2(a) > FRAC_PI_2 {
        return None;
    }
    if b <= 1e-12 * d.norm() {
        let len = a.min(step_ell);
        return (len > 1e-12).then(|| MotionPrimitive::straight(len));
    }
    let roll = d.y.atan2(d.x).rem_euclid(TAU);
    let needed = 2.0 * b / (a * a + b * b);
    let (kappa, reach) = if needed <= kappa_max {
        (needed, 2.0 * b.atan2(a) / needed)
    } else {
        let r = 1.0 / kappa_max;
        (kappa_max, a.atan2(r - b) * r)
    };
    let len = reach.min(step_ell);
    (len > 1e-12).then(|| MotionPrimitive::new(kappa, len, roll))
}

struct TreeNode {
    pose: Pose,
    parent: Option<usize>,
    primitive: Option<MotionPrimitive>,
    length: f64,
    cost: f64,
}

fn path_to(tree: &[TreeNode], mut id: usize) -> Vec<MotionPrimitive> {
    let mut out = Vec::new();
    while let Some(m) = tree[id].primitive {
        out.push(m);
        id = tree[id].parent.expect("non-root nodes have parents");
    }
    out.reverse();
    out
}

/// Anytime RRT: keeps sampling until the budget runs out and reports every
/// strict improvement of the best plan in the trace.
pub fn rrt_plan(problem: &PlanningProblem, cfg: &RrtConfig) -> Result<PlanResult> {
    problem.check()?;
    cfg.check()?;
    let env = &problem.env;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut clock = Clock::new(cfg.virtual_clock);
    let mut result = PlanResult::empty(Termination::Timeout);
    let mut best: Option<(Trajectory, f64)> = None;
    let mut tree = vec![TreeNode {
        pose: problem.x_start,
        parent: None,
        primitive: None,
        length: 0.0,
        cost: 0.0,
    }];
    let (lo, hi) = (env.lower_corner(), env.upper_corner());

    let offer = |prims: Vec<MotionPrimitive>, time: f64, best: &mut Option<(Trajectory, f64)>, trace: &mut Vec<TracePoint>| {
        let t = Trajectory::new(problem.x_start, prims);
        let Ok(cost) = problem.trajectory_cost(&t) else { return };
        if best.as_ref().map_or(true, |b| cost < b.1) && problem.validate_plan(&t).is_ok() {
            trace.push(TracePoint { time_ms: time, cost });
            *best = Some((t, cost));
        }
    };

    if problem.at_goal(&problem.x_start.p) {
        offer(Vec::new(), clock.elapsed_ms(), &mut best, &mut result.trace);
    }
    let mut iterations = 0u64;
    loop {
        if clock.elapsed_ms() >= cfg.time_budget_ms || cfg.max_iterations.is_some_and(|m| iterations >= m) {
            break;
        }
        iterations += 1;
        clock.tick();
        let sample = if rng.gen_bool(cfg.goal_bias) {
            problem.p_goal
        } else {
            Vec3::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y), rng.gen_range(lo.z..hi.z))
        };
        // nearest node from which the sample lies in the reachable trumpet
        let mut nearest: Option<(f64, usize)> = None;
        for (i, n) in tree.iter().enumerate() {
            if problem.at_goal(&n.pose.p) || !problem.turn_ok(&n.pose) {
                continue;
            }
            let d = (n.pose.p - sample).norm();
            if nearest.is_some_and(|(bd, _)| d >= bd) {
                continue;
            }
            let spec = ReachSpec {
                kappa_max: problem.kappa_max,
                max_turn: problem.max_turn,
                remaining_length: problem.ell_max - n.length,
                tau: 1e-9,
            };
            if goal_reachable(&n.pose, &sample, &spec) {
                nearest = Some((d, i));
            }
        }
        let Some((_, pid)) = nearest else {
            result.nodes_pruned_reach += 1;
            continue;
        };
        let parent = &tree[pid];
        let Some(m) = steer(&parent.pose, &sample, problem.kappa_max, cfg.step_ell) else {
            result.nodes_invalid += 1;
            continue;
        };
        let length = parent.length + m.delta_ell;
        if length > problem.ell_max || !problem.edge_free(&parent.pose, &m) {
            result.nodes_invalid += 1;
            continue;
        }
        let pose = apply_primitive(&parent.pose, &m);
        if !problem.at_goal(&pose.p) && !problem.turn_ok(&pose) {
            result.nodes_invalid += 1;
            continue;
        }
        let cost = parent.cost + problem.edge_cost(&parent.pose, &m);
        tree.push(TreeNode {
            pose,
            parent: Some(pid),
            primitive: Some(m),
            length,
            cost,
        });
        result.nodes_generated += 1;
        let id = tree.len() - 1;
        let now = clock.elapsed_ms();
        if problem.at_goal(&pose.p) {
            offer(path_to(&tree, id), now, &mut best, &mut result.trace);
        } else if let Some(tail) = direct_goal_connect(
            env,
            &pose,
            &problem.p_goal,
            problem.tau,
            problem.kappa_max,
            problem.ell_max - length,
        ) {
            let mut prims = path_to(&tree, id);
            prims.extend(tail.primitives);
            offer(prims, now, &mut best, &mut result.trace);
        }
    }
    result.nodes_expanded = iterations;
    result.elapsed_ms = clock.elapsed_ms();
    if let Some((t, c)) = best {
        result.best = Some(t);
        result.best_cost = Some(c);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Environment;
    use crate::problem::CostKind;
    use std::sync::Arc;

    const K: f64 = 0.02;

    #[test]
    fn straight_ahead() {
        let m = steer(&Pose::identity(), &Vec3::new(0.0, 0.0, 30.0), K, 20.0).unwrap();
        assert_eq!(m.kappa, 0.0);
        assert_eq!(m.delta_ell, 20.0);
    }

    #[test]
    fn behind_is_rejected() {
        assert!(steer(&Pose::identity(), &Vec3::new(1.0, 0.0, -5.0), K, 20.0).is_none());
        assert!(steer(&Pose::identity(), &Vec3::zeros(), K, 20.0).is_none());
    }

    #[test]
    fn quarter_arc_inversion() {
        let r = 1.0 / K;
        for roll in [0.3, 1.9, 4.0] {
            let local = Vec3::new(r * f64::cos(roll), r * f64::sin(roll), r);
            let m = steer(&Pose::identity(), &local, K, 1000.0).unwrap();
            assert!((m.kappa - K).abs() < 1e-12);
            assert!((m.delta_theta - roll).abs() < 1e-9);
            assert!((m.delta_ell - r * FRAC_PI_2).abs() < 1e-9);
            let end = apply_primitive(&Pose::identity(), &m);
            assert!((end.p - local).norm() < 1e-9);
        }
    }

    #[test]
    fn clamped_steer_stops_at_closest_approach() {
        let target = Vec3::new(20.0, 0.0, 10.0);
        let m = steer(&Pose::identity(), &target, K, 1000.0).unwrap();
        assert_eq!(m.kappa, K);
        let d = |s: f64| (apply_primitive(&Pose::identity(), &m.truncated(s)).p - target).norm();
        let at = d(m.delta_ell);
        assert!(at <= d(m.delta_ell - 0.01) && at <= d(m.delta_ell + 0.01));
    }

    fn open_problem(goal: Vec3) -> PlanningProblem {
        let env = Arc::new(Environment::uniform(Vec3::zeros(), 1.0, [48, 48, 48], 1.0));
        PlanningProblem::new(env, Pose::at(Vec3::new(24.0, 24.0, 2.0)), goal, 1.0, 60.0, 0.05, CostKind::Length)
    }

    fn cfg(seed: u64) -> RrtConfig {
        RrtConfig {
            seed,
            time_budget_ms: 20.0,
            virtual_clock: Some(100.0),
            ..RrtConfig::default()
        }
    }

    #[test]
    fn finds_plan_ahead_with_lower_bound() {
        let p = open_problem(Vec3::new(27.0, 22.0, 35.0));
        let r = rrt_plan(&p, &cfg(1)).unwrap();
        let best = r.best.clone().expect("plan");
        p.validate_plan(&best).unwrap();
        assert!(r.best_cost.unwrap() >= (p.p_goal - p.x_start.p).norm() - p.tau);
        for w in r.trace.windows(2) {
            assert!(w[1].cost < w[0].cost);
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let p = open_problem(Vec3::new(30.0, 20.0, 40.0));
        let a = rrt_plan(&p, &cfg(5)).unwrap();
        let b = rrt_plan(&p, &cfg(5)).unwrap();
        assert_eq!(a, b);
    }
}
