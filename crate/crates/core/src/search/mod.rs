//! Multi-resolution lattice search.
//!
//! `Mode::Ros` orders a rank window by `f = C + h`, prunes against the
//! incumbent plan, and only merges similar nodes when the closed one is no
//! more expensive. `Mode::Rcs` extracts in strict rank order and merges on
//! proximity alone.

mod clock;
mod closed;
mod open;

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use clock::Clock;
pub use closed::{is_duplicate, ClosedSet};
pub use open::{open_extract, OpenList};

use crate::error::{Error, Result};
use crate::guidance::{direct_goal_connect, goal_reachable, heuristic, inevitable_collision};
use crate::kinematics::{apply_primitive, MotionPrimitive, Pose, Trajectory};
use crate::lattice::{
    canonical_key, coarsest_primitives, node_rank, refine_primitives, valid_resolution, PrimitiveKey,
    Rank, Resolution,
};
use crate::problem::PlanningProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ros,
    Rcs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub mode: Mode,
    pub n_la: u32,
    pub alpha: f64,
    pub d_sim: f64,
    pub eps: f64,
    pub r_min: Resolution,
    pub delta_ell_max: f64,
    /// `None` runs until OPEN is exhausted.
    pub time_budget_ms: Option<f64>,
    pub threads: usize,
    pub seed: u64,
    pub direct_connect: bool,
    pub inevitable_check: bool,
    /// Nodes per virtual millisecond; `None` uses wall time.
    pub virtual_clock: Option<f64>,
    /// Keep per-node samples of expanded and reach-pruned nodes.
    pub record_nodes: bool,
}

impl PlannerConfig {
    /// Defaults for a given problem: the cutoff `{0.125 mm, 0.157 rad}`,
    /// `δℓ_max = 20`, `n_la = 3`, `ε = 0.1`, and the default `d_sim`.
    pub fn ros(problem: &PlanningProblem) -> Self {
        let r_min = Resolution::new(0.125, 0.157);
        Self {
            mode: Mode::Ros,
            n_la: 3,
            alpha: 1.0,
            d_sim: default_d_sim(problem.kappa_max, r_min.delta_ell_min, problem.tau),
            eps: 0.1,
            r_min,
            delta_ell_max: 20.0,
            time_budget_ms: Some(10_000.0),
            threads: 1,
            seed: 0,
            direct_connect: true,
            inevitable_check: true,
            virtual_clock: None,
            record_nodes: false,
        }
    }

    pub fn rcs(problem: &PlanningProblem) -> Self {
        Self {
            mode: Mode::Rcs,
            n_la: 0,
            ..Self::ros(problem)
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.d_sim > 0.0) || !(self.alpha > 0.0) || self.threads == 0 {
            return Err(Error::InvalidArgument("need d_sim > 0, alpha > 0, threads >= 1".into()));
        }
        if !self.r_min.is_valid(self.delta_ell_max) {
            return Err(Error::InvalidArgument(format!(
                "cutoff {:?} invalid for delta_ell_max {}",
                self.r_min, self.delta_ell_max
            )));
        }
        if let Some(r) = self.virtual_clock {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument("virtual clock rate must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Minimum positional gap between a node and any successor.
pub fn successor_gap(kappa_max: f64, delta_ell_min: f64) -> f64 {
    (2.0 / kappa_max) * (kappa_max * delta_ell_min / 2.0).sin()
}

/// `d_sim` upper bound `min{(2/κ) sin(κ δℓ_min / 2), δ (L_s − 1) / (2 (L_s^H − 1))}`
/// with `H = ⌈ℓ_max / δℓ_min⌉`.
pub fn dsim_from_theory(kappa_max: f64, delta_ell_min: f64, ell_max: f64, l_s: f64, delta: f64) -> Result<f64> {
    if !(l_s > 1.0) {
        return Err(Error::InvalidArgument(format!("L_s must exceed 1, got {l_s}")));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let h = horizon(ell_max, delta_ell_min);
    let denom = l_s.powf(h as f64) - 1.0;
    let second = if denom.is_finite() {
        delta * (l_s - 1.0) / (2.0 * denom)
    } else {
        0.0
    };
    Ok(successor_gap(kappa_max, delta_ell_min).min(second))
}

pub fn horizon(ell_max: f64, delta_ell_min: f64) -> u64 {
    (ell_max / delta_ell_min - 1e-12).ceil().max(0.0) as u64
}

/// `min(successor gap, τ/4)` for when the theory constants are unknown.
pub fn default_d_sim(kappa_max: f64, delta_ell_min: f64, tau: f64) -> f64 {
    successor_gap(kappa_max, delta_ell_min).min(tau / 4.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub parent: Option<usize>,
    pub primitive: Option<MotionPrimitive>,
    pub pose: Pose,
    pub cost_to_come: f64,
    /// Path length from the root.
    pub length: f64,
    pub depth: u32,
    pub rank: Rank,
    pub h: f64,
    pub f: f64,
    pub insertion_index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    OpenExhausted,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub time_ms: f64,
    pub cost: f64,
}

/// A node seen during search, kept when `record_nodes` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSample {
    pub pose: Pose,
    pub length: f64,
    pub cost_to_come: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub best: Option<Trajectory>,
    pub best_cost: Option<f64>,
    pub trace: Vec<TracePoint>,
    pub nodes_expanded: u64,
    pub nodes_generated: u64,
    pub nodes_pruned_duplicate: u64,
    pub nodes_pruned_reach: u64,
    pub nodes_pruned_cost: u64,
    pub nodes_invalid: u64,
    pub terminated: Termination,
    pub elapsed_ms: f64,
    #[serde(skip)]
    pub expanded_log: Vec<NodeSample>,
    #[serde(skip)]
    pub pruned_log: Vec<NodeSample>,
}

impl PlanResult {
    pub fn empty(terminated: Termination) -> Self {
        Self {
            best: None,
            best_cost: None,
            trace: Vec::new(),
            nodes_expanded: 0,
            nodes_generated: 0,
            nodes_pruned_duplicate: 0,
            nodes_pruned_reach: 0,
            nodes_pruned_cost: 0,
            nodes_invalid: 0,
            terminated,
            elapsed_ms: 0.0,
            expanded_log: Vec::new(),
            pruned_log: Vec::new(),
        }
    }

    pub fn first(&self) -> Option<TracePoint> {
        self.trace.first().copied()
    }

    pub fn last(&self) -> Option<TracePoint> {
        self.trace.last().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Valid,
    TooLong,
    CostBound,
    Unreachable,
    Collision,
    Inevitable,
}

struct Evaluation {
    verdict: Verdict,
    /// Tail primitives and total plan cost of a direct goal connection.
    direct: Option<(Vec<MotionPrimitive>, f64)>,
}

/// Validity test for one node.
pub fn node_valid(v: &Node, parent_pose: Option<&Pose>, problem: &PlanningProblem, config: &PlannerConfig, best_cost: Option<f64>) -> bool {
    check_node(v, parent_pose, problem, config, best_cost) == Verdict::Valid
}

fn check_node(
    v: &Node,
    parent_pose: Option<&Pose>,
    problem: &PlanningProblem,
    config: &PlannerConfig,
    best_cost: Option<f64>,
) -> Verdict {
    if v.length > problem.ell_max * (1.0 + 1e-12) + 1e-12 {
        return Verdict::TooLong;
    }
    if config.mode == Mode::Ros {
        if let Some(b) = best_cost {
            if !(v.f < b - 1e-12) {
                return Verdict::CostBound;
            }
        }
    }
    let spec = problem.reach_spec(problem.ell_max - v.length);
    if !goal_reachable(&v.pose, &problem.p_goal, &spec) {
        return Verdict::Unreachable;
    }
    if let (Some(x), Some(m)) = (parent_pose, v.primitive.as_ref()) {
        if !problem.edge_free(x, m) {
            return Verdict::Collision;
        }
    }
    if config.inevitable_check && inevitable_collision(&problem.env, &v.pose, &problem.p_goal, &spec) {
        return Verdict::Inevitable;
    }
    Verdict::Valid
}

struct Search<'a> {
    problem: &'a PlanningProblem,
    config: &'a PlannerConfig,
    nodes: Vec<Node>,
    open: OpenList,
    closed: ClosedSet,
    children: HashSet<(usize, PrimitiveKey)>,
    coarse: Vec<MotionPrimitive>,
    best: Option<(Trajectory, f64)>,
    result: PlanResult,
    clock: Clock,
    n_la: u32,
}

impl<'a> Search<'a> {
    fn push_node(&mut self, parent: Option<usize>, m: Option<MotionPrimitive>) {
        let (pose, cost, length, depth, rank) = match (parent, m) {
            (Some(pid), Some(m)) => {
                let key = canonical_key(&m, self.config.delta_ell_max);
                if !self.children.insert((pid, key)) {
                    return;
                }
                let p = &self.nodes[pid];
                let pose = apply_primitive(&p.pose, &m);
                (
                    pose,
                    p.cost_to_come + self.problem.edge_cost(&p.pose, &m),
                    p.length + m.delta_ell,
                    p.depth + 1,
                    node_rank(p.rank, &m),
                )
            }
            _ => (self.problem.x_start, 0.0, 0.0, 0, Rank::ROOT),
        };
        let h = heuristic(
            &pose,
            &self.problem.p_goal,
            self.problem.tau,
            self.problem.kappa_max,
            self.problem.c_min(),
        );
        let id = self.nodes.len();
        let node = Node {
            id,
            parent,
            primitive: m,
            pose,
            cost_to_come: cost,
            length,
            depth,
            rank,
            h,
            f: cost + h,
            insertion_index: id as u64,
        };
        self.open.insert(&node);
        self.nodes.push(node);
        self.result.nodes_generated += 1;
    }

    fn primitives_to(&self, id: usize) -> Vec<MotionPrimitive> {
        let mut out = Vec::with_capacity(self.nodes[id].depth as usize);
        let mut cur = id;
        while let Some(m) = self.nodes[cur].primitive {
            out.push(m);
            cur = self.nodes[cur].parent.expect("non-root node has a parent");
        }
        out.reverse();
        out
    }

    fn best_cost(&self) -> Option<f64> {
        self.best.as_ref().map(|b| b.1)
    }

    fn offer(&mut self, prims: Vec<MotionPrimitive>) {
        let t = Trajectory::new(self.problem.x_start, prims);
        let Ok(cost) = self.problem.trajectory_cost(&t) else {
            return;
        };
        if self.best_cost().is_some_and(|b| cost >= b) {
            return;
        }
        log::debug!("plan improved to {cost:.6} ({} primitives)", t.primitives.len());
        self.result.trace.push(TracePoint {
            time_ms: self.clock.elapsed_ms(),
            cost,
        });
        self.best = Some((t, cost));
    }

    fn evaluate(&self, id: usize, best_cost: Option<f64>) -> Evaluation {
        let v = &self.nodes[id];
        let parent_pose = v.parent.map(|p| &self.nodes[p].pose);
        let verdict = check_node(v, parent_pose, self.problem, self.config, best_cost);
        let mut direct = None;
        if verdict == Verdict::Valid && self.config.direct_connect && !self.problem.at_goal(&v.pose.p) {
            if let Some(t) = direct_goal_connect(
                &self.problem.env,
                &v.pose,
                &self.problem.p_goal,
                self.problem.tau,
                self.problem.kappa_max,
                self.problem.ell_max - v.length,
            ) {
                let mut x = v.pose;
                let mut total = v.cost_to_come;
                for m in &t.primitives {
                    total += self.problem.edge_cost(&x, m);
                    x = apply_primitive(&x, m);
                }
                if best_cost.map_or(true, |b| total < b) {
                    direct = Some((t.primitives, total));
                }
            }
        }
        Evaluation { verdict, direct }
    }

    fn sample(&self, id: usize) -> NodeSample {
        let v = &self.nodes[id];
        NodeSample {
            pose: v.pose,
            length: v.length,
            cost_to_come: v.cost_to_come,
            h: v.h,
        }
    }

    fn commit(&mut self, id: usize, eval: Evaluation) {
        self.clock.tick();
        let mut verdict = eval.verdict;
        if verdict == Verdict::Valid && self.config.mode == Mode::Ros {
            if let Some(b) = self.best_cost() {
                if !(self.nodes[id].f < b - 1e-12) {
                    verdict = Verdict::CostBound;
                }
            }
        }
        match verdict {
            Verdict::Valid => self.process_valid(id, eval.direct),
            Verdict::CostBound => self.result.nodes_pruned_cost += 1,
            Verdict::Unreachable | Verdict::Inevitable => {
                self.result.nodes_pruned_reach += 1;
                if self.config.record_nodes {
                    let s = self.sample(id);
                    self.result.pruned_log.push(s);
                }
            }
            Verdict::TooLong | Verdict::Collision => self.result.nodes_invalid += 1,
        }
        // refine the edge that led here, even when the node itself failed
        let v = &self.nodes[id];
        if let (Some(parent), Some(m)) = (v.parent, v.primitive) {
            for r in refine_primitives(&m, self.config.delta_ell_max) {
                if valid_resolution(&r, &self.config.r_min, self.config.delta_ell_max) {
                    self.push_node(Some(parent), Some(r));
                }
            }
        }
    }

    fn process_valid(&mut self, id: usize, direct: Option<(Vec<MotionPrimitive>, f64)>) {
        if let Some((tail, total)) = direct {
            if self.best_cost().map_or(true, |b| total < b) {
                let mut prims = self.primitives_to(id);
                prims.extend(tail);
                self.offer(prims);
            }
        }
        let v = &self.nodes[id];
        if self
            .closed
            .is_duplicate(&v.pose, v.cost_to_come, self.config.d_sim, self.config.alpha, self.config.mode)
        {
            self.result.nodes_pruned_duplicate += 1;
            return;
        }
        if self.problem.at_goal(&v.pose.p) {
            let prims = self.primitives_to(id);
            self.offer(prims);
        }
        if self.config.record_nodes {
            let s = self.sample(id);
            self.result.expanded_log.push(s);
        }
        for m in self.coarse.clone() {
            self.push_node(Some(id), Some(m));
        }
        let v = &self.nodes[id];
        self.closed.insert(v.pose, v.cost_to_come);
        self.result.nodes_expanded += 1;
    }

    fn out_of_time(&self) -> bool {
        self.config
            .time_budget_ms
            .is_some_and(|b| self.clock.elapsed_ms() >= b)
    }

    fn run(&mut self) -> Termination {
        self.push_node(None, None);
        let batch = self.config.threads.max(1);
        let pool = if batch > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(batch)
                    .build()
                    .expect("thread pool"),
            )
        } else {
            None
        };
        loop {
            if self.open.is_empty() {
                return Termination::OpenExhausted;
            }
            if self.out_of_time() {
                return Termination::Timeout;
            }
            let mut ids = Vec::with_capacity(batch);
            while ids.len() < batch {
                match self.open.extract(self.n_la) {
                    Some(id) => ids.push(id),
                    None => break,
                }
            }
            let best = self.best_cost();
            let evals: Vec<Evaluation> = match &pool {
                Some(pool) => {
                    let this = &*self;
                    pool.install(|| ids.par_iter().map(|&id| this.evaluate(id, best)).collect())
                }
                None => ids.iter().map(|&id| self.evaluate(id, best)).collect(),
            };
            for (id, eval) in ids.into_iter().zip(evals) {
                self.commit(id, eval);
            }
        }
    }
}

/// Runs the planner until OPEN is exhausted or the budget runs out.
pub fn plan(problem: &PlanningProblem, config: &PlannerConfig) -> Result<PlanResult> {
    problem.check()?;
    config.check()?;
    let n_la = match config.mode {
        Mode::Ros => config.n_la,
        Mode::Rcs => 0,
    };
    let mut s = Search {
        problem,
        config,
        nodes: Vec::new(),
        open: OpenList::new(),
        closed: ClosedSet::new(config.d_sim),
        children: HashSet::new(),
        coarse: coarsest_primitives(problem.kappa_max, config.delta_ell_max),
        best: None,
        result: PlanResult::empty(Termination::OpenExhausted),
        clock: Clock::new(config.virtual_clock),
        n_la,
    };
    let terminated = s.run();
    let elapsed = s.clock.elapsed_ms();
    let mut result = s.result;
    result.terminated = terminated;
    result.elapsed_ms = elapsed;
    if let Some((t, c)) = s.best {
        result.best = Some(t);
        result.best_cost = Some(c);
    }
    log::info!(
        "{:?}: {:?} after {} expansions, best {:?}",
        config.mode,
        terminated,
        result.nodes_expanded,
        result.best_cost
    );
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Environment;
    use crate::kinematics::Vec3;
    use crate::problem::CostKind;
    use std::sync::Arc;

    fn open_problem() -> PlanningProblem {
        let env = Environment::uniform(Vec3::zeros(), 1.0, [32, 32, 32], 1.0);
        PlanningProblem::new(
            Arc::new(env),
            Pose::at(Vec3::new(16.0, 16.0, 2.0)),
            Vec3::new(19.0, 14.0, 20.0),
            2.0,
            40.0,
            0.05,
            CostKind::Length,
        )
    }

    fn small_config(p: &PlanningProblem) -> PlannerConfig {
        let mut c = PlannerConfig::ros(p);
        c.r_min = Resolution::new(5.0, std::f64::consts::PI / 8.0);
        c.d_sim = default_d_sim(p.kappa_max, 5.0, p.tau);
        c.time_budget_ms = None;
        c.inevitable_check = false;
        c
    }

    #[test]
    fn dsim_numbers() {
        let first = successor_gap(0.02, 0.125);
        assert!((first - 100.0 * 0.00125f64.sin()).abs() < 1e-12);
        let both = dsim_from_theory(0.02, 0.125, 1.0, 1.5, 10.0).unwrap();
        assert_eq!(both, first.min(10.0 * 0.5 / (2.0 * (1.5f64.powi(8) - 1.0))));
        assert_eq!(horizon(100.0, 0.125), 800);
        let tiny = dsim_from_theory(0.02, 0.125, 1.0, 1.5, 1e-12).unwrap();
        assert!(tiny < 1e-12);
        assert!(dsim_from_theory(0.02, 0.125, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn goal_at_start_gives_empty_plan() {
        let mut p = open_problem();
        p.p_goal = p.x_start.p + Vec3::new(0.3, 0.0, 0.2);
        let r = plan(&p, &small_config(&p)).unwrap();
        assert_eq!(r.best_cost, Some(0.0));
        assert!(r.best.unwrap().primitives.is_empty());
        assert_eq!(r.terminated, Termination::OpenExhausted);
    }

    #[test]
    fn finds_valid_plans_in_both_modes() {
        let p = open_problem();
        for mode in [Mode::Ros, Mode::Rcs] {
            let mut c = small_config(&p);
            c.mode = mode;
            c.direct_connect = false;
            let r = plan(&p, &c).unwrap();
            let best = r.best.clone().expect("plan");
            p.validate_plan(&best).unwrap();
            assert!((r.best_cost.unwrap() - p.trajectory_cost(&best).unwrap()).abs() < 1e-9);
            for w in r.trace.windows(2) {
                assert!(w[1].cost < w[0].cost);
            }
            assert_eq!(r.terminated, Termination::OpenExhausted);
            // exhaustive reference cost on the same lattice
            assert!(r.best_cost.unwrap() >= 20.0 - 1e-9);
        }
    }

    #[test]
    fn exhausts_without_plan_when_lattice_misses_goal() {
        let mut p = open_problem();
        p.tau = 1.0;
        let mut c = small_config(&p);
        c.direct_connect = false;
        let r = plan(&p, &c).unwrap();
        assert!(r.best.is_none());
        assert_eq!(r.terminated, Termination::OpenExhausted);
    }

    #[test]
    fn invalid_start_is_an_error() {
        let mut p = open_problem();
        p.x_start = Pose::at(Vec3::new(-10.0, 0.0, 0.0));
        assert!(matches!(plan(&p, &small_config(&p)), Err(Error::InvalidStart(_))));
    }

    #[test]
    fn single_thread_runs_repeat_exactly() {
        let p = open_problem();
        let c = small_config(&p);
        let a = plan(&p, &c).unwrap();
        let b = plan(&p, &c).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.nodes_generated, b.nodes_generated);
    }

    #[test]
    fn threaded_runs_return_valid_plans() {
        let p = open_problem();
        let mut c = small_config(&p);
        c.threads = 3;
        let r = plan(&p, &c).unwrap();
        p.validate_plan(r.best.as_ref().unwrap()).unwrap();
    }

    #[test]
    fn node_validity_rules() {
        let p = open_problem();
        let c = small_config(&p);
        let m = MotionPrimitive::straight(10.0);
        let mut v = Node {
            id: 1,
            parent: Some(0),
            primitive: Some(m),
            pose: apply_primitive(&p.x_start, &m),
            cost_to_come: 10.0,
            length: 10.0,
            depth: 1,
            rank: Rank(1),
            h: 5.0,
            f: 15.0,
            insertion_index: 1,
        };
        assert!(node_valid(&v, Some(&p.x_start), &p, &c, None));
        assert!(!node_valid(&v, Some(&p.x_start), &p, &c, Some(15.0)));
        let mut rcs = c.clone();
        rcs.mode = Mode::Rcs;
        assert!(node_valid(&v, Some(&p.x_start), &p, &rcs, Some(15.0)));
        v.length = p.ell_max + 5.0;
        assert!(!node_valid(&v, Some(&p.x_start), &p, &c, None));
    }
}
