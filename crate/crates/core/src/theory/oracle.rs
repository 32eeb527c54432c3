//! Exhaustive lattice search used as an independent reference optimum.

use crate::error::{Error, Result};
use crate::kinematics::{apply_primitive, MotionPrimitive, Pose, Trajectory};
use crate::lattice::{all_primitives, Resolution};
use crate::problem::PlanningProblem;

/// Default node budget for `brute_force_optimal`.
pub const DEFAULT_NODE_CAP: u64 = 10_000_000;

struct Dfs<'a> {
    problem: &'a PlanningProblem,
    actions: Vec<MotionPrimitive>,
    c_min: f64,
    stack: Vec<MotionPrimitive>,
    best: Option<(Vec<MotionPrimitive>, f64)>,
    visited: u64,
    cap: u64,
}

impl Dfs<'_> {
    fn bound(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.1)
    }

    fn lower_bound(&self, x: &Pose, cost: f64) -> f64 {
        let d = (x.p - self.problem.p_goal).norm() - self.problem.tau;
        cost + self.c_min * d.max(0.0)
    }

    fn visit(&mut self, x: &Pose, length: f64, cost: f64) -> Result<()> {
        self.visited += 1;
        if self.visited > self.cap {
            return Err(Error::InstanceTooLarge { limit: self.cap });
        }
        if self.problem.at_goal(&x.p) {
            if cost < self.bound() {
                self.best = Some((self.stack.clone(), cost));
            }
            return Ok(());
        }
        if !self.problem.turn_ok(x) {
            return Ok(());
        }
        let mut children = Vec::new();
        for m in &self.actions {
            if length + m.delta_ell > self.problem.ell_max * (1.0 + 1e-12) + 1e-12 {
                continue;
            }
            let y = apply_primitive(x, m);
            let c = cost + self.problem.edge_cost(x, m);
            if self.lower_bound(&y, c) >= self.bound() {
                continue;
            }
            if !self.problem.edge_free(x, m) {
                continue;
            }
            children.push((self.lower_bound(&y, c), *m, y, c));
        }
        // best-first child order only tightens the bound sooner
        children.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (lb, m, y, c) in children {
            if lb >= self.bound() {
                continue;
            }
            self.stack.push(m);
            let r = self.visit(&y, length + m.delta_ell, c);
            self.stack.pop();
            r?;
        }
        Ok(())
    }
}

/// Minimum-cost valid plan over every lattice primitive sequence down to
/// resolution `r`. Only problem constraints prune; the cost bound uses the
/// Euclidean distance to the goal ball, which no plan can beat.
pub fn brute_force_optimal(
    problem: &PlanningProblem,
    r: &Resolution,
    delta_ell_max: f64,
    node_cap: u64,
) -> Result<Option<(Trajectory, f64)>> {
    problem.check()?;
    if !r.is_valid(delta_ell_max) {
        return Err(Error::InvalidArgument(format!("invalid resolution {r:?}")));
    }
    let mut dfs = Dfs {
        problem,
        actions: all_primitives(problem.kappa_max, delta_ell_max, r),
        c_min: problem.c_min(),
        stack: Vec::new(),
        best: None,
        visited: 0,
        cap: node_cap,
    };
    dfs.visit(&problem.x_start, 0.0, 0.0)?;
    log::debug!("brute force visited {} nodes", dfs.visited);
    Ok(dfs
        .best
        .map(|(prims, c)| (Trajectory::new(problem.x_start, prims), c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Environment;
    use crate::kinematics::Vec3;
    use crate::problem::CostKind;
    use std::f64::consts::FRAC_PI_8;
    use std::sync::Arc;

    fn problem(goal: Vec3, tau: f64) -> PlanningProblem {
        let env = Arc::new(Environment::uniform(Vec3::zeros(), 1.0, [32, 32, 32], 1.0));
        PlanningProblem::new(env, Pose::at(Vec3::new(16.0, 16.0, 2.0)), goal, tau, 40.0, 0.05, CostKind::Length)
    }

    #[test]
    fn goal_at_start_gives_empty_plan() {
        let p = problem(Vec3::new(16.0, 16.0, 2.5), 1.0);
        let (t, c) = brute_force_optimal(&p, &Resolution::new(5.0, FRAC_PI_8), 20.0, 1000).unwrap().unwrap();
        assert!(t.primitives.is_empty());
        assert_eq!(c, 0.0);
    }

    #[test]
    fn straight_goal_found_and_valid() {
        let p = problem(Vec3::new(16.0, 16.0, 27.0), 1.0);
        let (t, c) = brute_force_optimal(&p, &Resolution::new(5.0, FRAC_PI_8), 20.0, 1_000_000).unwrap().unwrap();
        assert!((c - 25.0).abs() < 1e-9);
        p.validate_plan(&t).unwrap();
    }

    #[test]
    fn cap_is_enforced() {
        let p = problem(Vec3::new(19.0, 14.0, 20.0), 0.1);
        let r = brute_force_optimal(&p, &Resolution::new(5.0, FRAC_PI_8), 20.0, 10);
        assert!(matches!(r, Err(Error::InstanceTooLarge { .. })));
    }
}
