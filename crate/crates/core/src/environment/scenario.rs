//! Seeded synthetic scenarios: spherical and tubular obstacles, a smooth
//! random cost field, and a start/goal pair that is neither hopeless nor
//! solvable by a single arc.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Environment;
use crate::error::{Error, Result};
use crate::guidance::{goal_in_cone, inevitable_collision};
use crate::kinematics::{apply_primitive, MotionPrimitive, Pose, Vec3};
use crate::problem::{CostKind, PlanningProblem};

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioMode {
    /// Goal at the end of a collision-free two-arc witness path; rejects
    /// scenarios that a single arc solves.
    #[default]
    Standard,
    /// Encloses the goal in a closed obstacle shell.
    Sealed,
    /// Keeps a single sampled arc collision-free, so a direct plan exists.
    Trivial,
}

/// Smooth cost field: `c_min + (c_max − c_min)·clamp(base + Σ blobs, 0, 1)`
/// with Gaussian blobs of width `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub c_min: f64,
    pub c_max: f64,
    pub base: f64,
    pub blobs: usize,
    pub sigma: f64,
}

impl Default for CostSpec {
    fn default() -> Self {
        Self {
            c_min: 0.01,
            c_max: 1.0,
            base: 0.2,
            blobs: 12,
            sigma: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub spec_version: u32,
    pub seed: u64,
    #[serde(default)]
    pub mode: ScenarioMode,
    pub dims: [usize; 3],
    pub spacing: f64,
    pub needle_radius: f64,
    pub spheres: usize,
    pub sphere_radius: [f64; 2],
    pub tubes: usize,
    pub tube_radius: [f64; 2],
    pub tube_length: [f64; 2],
    /// Extra spheres dropped onto the start-goal chord, shrunk to keep the
    /// witness path clear.
    pub blockers: usize,
    pub blocker_radius: [f64; 2],
    pub cost: CostSpec,
    pub cost_kind: CostKind,
    pub tau: f64,
    pub ell_max: f64,
    pub kappa_max: f64,
    /// Length range of the witness path from start to goal.
    pub goal_distance: [f64; 2],
    /// Minimum distance from the start to the workspace boundary.
    pub margin: f64,
    pub max_retries: u32,
}

impl ScenarioSpec {
    /// A 32³ grid at 1 mm with a short, sharply curving needle.
    pub fn small(seed: u64) -> Self {
        Self {
            spec_version: SPEC_VERSION,
            seed,
            mode: ScenarioMode::Standard,
            dims: [32, 32, 32],
            spacing: 1.0,
            needle_radius: 0.5,
            spheres: 4,
            sphere_radius: [1.5, 3.5],
            tubes: 2,
            tube_radius: [0.8, 1.5],
            tube_length: [8.0, 20.0],
            blockers: 1,
            blocker_radius: [2.0, 4.0],
            cost: CostSpec::default(),
            cost_kind: CostKind::Length,
            tau: 1.0,
            ell_max: 30.0,
            kappa_max: 0.1,
            goal_distance: [16.0, 24.0],
            margin: 4.0,
            max_retries: 200,
        }
    }

    /// A clinically sized needle (`κ = 1/50`, `ℓ_max = 100`, `τ = 1`)
    /// in a 96 mm cube at 1.5 mm voxels.
    pub fn standard(seed: u64) -> Self {
        Self {
            spec_version: SPEC_VERSION,
            seed,
            mode: ScenarioMode::Standard,
            dims: [64, 64, 64],
            spacing: 1.5,
            needle_radius: 1.0,
            spheres: 14,
            sphere_radius: [3.0, 7.0],
            tubes: 10,
            tube_radius: [1.0, 2.5],
            tube_length: [20.0, 60.0],
            blockers: 2,
            blocker_radius: [3.0, 6.0],
            cost: CostSpec {
                sigma: 8.0,
                blobs: 24,
                ..CostSpec::default()
            },
            cost_kind: CostKind::Costmap,
            tau: 1.0,
            ell_max: 100.0,
            kappa_max: 0.02,
            goal_distance: [45.0, 85.0],
            margin: 8.0,
            max_retries: 300,
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("scenario spec: {m}")));
        if self.spec_version != SPEC_VERSION {
            return bad(&format!("unsupported spec_version {}", self.spec_version));
        }
        if self.dims.iter().any(|&d| d < 2) || !(self.spacing > 0.0) {
            return bad("dims must be >= 2 and spacing > 0");
        }
        if !(self.tau > 0.0 && self.kappa_max > 0.0 && self.ell_max > 0.0) {
            return bad("tau, kappa_max and ell_max must be positive");
        }
        if !(self.goal_distance[0] > 0.0 && self.goal_distance[0] <= self.goal_distance[1]) {
            return bad("goal_distance must be a positive range");
        }
        if !(self.cost.c_min > 0.0 && self.cost.c_max >= self.cost.c_min) {
            return bad("cost bounds must satisfy 0 < c_min <= c_max");
        }
        Ok(())
    }
}

fn range(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.gen_range(r[0]..r[1])
    } else {
        r[0]
    }
}

fn unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Sphere { c: Vec3, r: f64 },
    Tube { a: Vec3, b: Vec3, r: f64 },
    Shell { c: Vec3, inner: f64, outer: f64 },
}

impl Shape {
    /// Distance from `p` to the solid, zero inside.
    fn distance(&self, p: &Vec3) -> f64 {
        match *self {
            Shape::Sphere { c, r } => ((p - c).norm() - r).max(0.0),
            Shape::Tube { a, b, r } => {
                let ab = b - a;
                let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
                ((p - (a + t * ab)).norm() - r).max(0.0)
            }
            Shape::Shell { c, inner, outer } => {
                let d = (p - c).norm();
                (inner - d).max(d - outer).max(0.0)
            }
        }
    }

    fn contains(&self, p: &Vec3) -> bool {
        match *self {
            Shape::Sphere { c, r } => (p - c).norm() <= r,
            Shape::Tube { a, b, r } => {
                let ab = b - a;
                let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
                (p - (a + t * ab)).norm() <= r
            }
            Shape::Shell { c, inner, outer } => {
                let d = (p - c).norm();
                d >= inner && d <= outer
            }
        }
    }
}

struct Builder<'a> {
    spec: &'a ScenarioSpec,
    origin: Vec3,
    extent: Vec3,
}

impl Builder<'_> {
    fn random_point(&self, rng: &mut ChaCha8Rng, margin: f64) -> Vec3 {
        let lo = self.origin - Vec3::repeat(0.5 * self.spec.spacing);
        Vec3::from_fn(|a, _| {
            let m = margin.min(0.45 * self.extent[a]);
            lo[a] + rng.gen_range(m..self.extent[a] - m)
        })
    }

    fn base_shapes(&self, rng: &mut ChaCha8Rng) -> Vec<Shape> {
        let s = self.spec;
        let mut out = Vec::new();
        for _ in 0..s.spheres {
            let c = self.random_point(rng, 0.0);
            out.push(Shape::Sphere {
                c,
                r: range(rng, s.sphere_radius),
            });
        }
        for _ in 0..s.tubes {
            let a = self.random_point(rng, 0.0);
            let b = a + unit(rng) * range(rng, s.tube_length);
            out.push(Shape::Tube {
                a,
                b,
                r: range(rng, s.tube_radius),
            });
        }
        out
    }

    fn cost_field(&self, rng: &mut ChaCha8Rng) -> Vec<f32> {
        let s = self.spec;
        let blobs: Vec<(Vec3, f64)> = (0..s.cost.blobs)
            .map(|_| (self.random_point(rng, 0.0), rng.gen_range(-0.6..1.0)))
            .collect();
        let [nx, ny, nz] = s.dims;
        let inv = 1.0 / (2.0 * s.cost.sigma * s.cost.sigma);
        let mut out = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let p = self.origin + Vec3::new(i as f64, j as f64, k as f64) * s.spacing;
                    let mut v = s.cost.base;
                    for (c, amp) in &blobs {
                        v += amp * (-(p - c).norm_squared() * inv).exp();
                    }
                    let v = v.clamp(0.0, 1.0);
                    out.push((s.cost.c_min + (s.cost.c_max - s.cost.c_min) * v) as f32);
                }
            }
        }
        out
    }

    fn environment(&self, shapes: &[Shape], cost: Vec<f32>) -> Result<Environment> {
        let s = self.spec;
        let [nx, ny, nz] = s.dims;
        let mut occ = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let p = self.origin + Vec3::new(i as f64, j as f64, k as f64) * s.spacing;
                    occ.push(shapes.iter().any(|sh| sh.contains(&p)));
                }
            }
        }
        Environment::new(self.origin, s.spacing, s.dims, occ, cost, s.needle_radius, s.cost.c_min, s.cost.c_max)
    }
}

/// Two arcs bending in roughly opposite directions, so that the endpoint
/// is usually not reachable by one arc.
fn two_arc_witness(rng: &mut ChaCha8Rng, spec: &ScenarioSpec) -> Vec<MotionPrimitive> {
    let total = range(rng, spec.goal_distance).min(spec.ell_max);
    let first = rng.gen_range(0.35..0.65) * total;
    let roll = rng.gen_range(0.0..2.0 * PI);
    let back = (PI + rng.gen_range(-0.5..0.5)).rem_euclid(2.0 * PI);
    vec![
        MotionPrimitive::new(rng.gen_range(0.5..=1.0) * spec.kappa_max, first, roll),
        MotionPrimitive::new(rng.gen_range(0.5..=1.0) * spec.kappa_max, total - first, back),
    ]
}

fn witness_samples(start: &Pose, witness: &[MotionPrimitive], h: f64) -> Vec<Vec3> {
    let mut out = vec![start.p];
    let mut x = *start;
    for m in witness {
        out.extend(super::arc_positions(&x, m, h).skip(1));
        x = apply_primitive(&x, m);
    }
    out
}

fn witness_free(env: &Environment, start: &Pose, witness: &[MotionPrimitive], kappa_max: f64) -> bool {
    let mut x = *start;
    for m in witness {
        if !env.edge_collision_free(&x, m, kappa_max) {
            return false;
        }
        x = apply_primitive(&x, m);
    }
    true
}

fn witness_turns_ok(start: &Pose, witness: &[MotionPrimitive], goal: &Vec3, tau: f64) -> bool {
    let mut x = *start;
    for m in &witness[..witness.len() - 1] {
        x = apply_primitive(&x, m);
        if !goal_in_cone(&x, goal, tau, std::f64::consts::FRAC_PI_2) {
            return false;
        }
    }
    true
}

/// The single arc from `x` through `g` within the curvature bound, if any.
fn exact_arc(x: &Pose, g: &Vec3, kappa_max: f64) -> Option<MotionPrimitive> {
    let t = x.tangent();
    let v = g - x.p;
    let a = v.dot(&t);
    let lat = v - a * t;
    let b = lat.norm();
    if b <= 1e-12 {
        return (a > 0.0).then(|| MotionPrimitive::new(0.0, a, 0.0));
    }
    let local = x.q.inverse() * (lat / b);
    let roll = local.y.atan2(local.x).rem_euclid(2.0 * PI);
    let kappa = 2.0 * b / (a * a + b * b);
    if kappa > kappa_max {
        return None;
    }
    let angle = 2.0 * b.atan2(a);
    Some(MotionPrimitive::new(kappa, angle / kappa, roll))
}

/// Whether some collision-free single constant-curvature arc from `x`
/// ends within `tau` of `g`. Sweeps the curving plane and curvature and
/// also tries the exact arc through `g`.
pub fn single_arc_connects(env: &Environment, x: &Pose, g: &Vec3, tau: f64, kappa_max: f64, ell_max: f64) -> bool {
    if (g - x.p).norm() <= tau {
        return true;
    }
    let h = env.collision_step(kappa_max);
    let reaches = |roll: f64, kappa: f64| -> bool {
        let m = MotionPrimitive::new(kappa, ell_max, roll);
        for p in super::arc_positions(x, &m, h) {
            if !env.is_free(&p) {
                return false;
            }
            if (p - g).norm() <= tau {
                return true;
            }
        }
        false
    };
    if let Some(m) = exact_arc(x, g, kappa_max) {
        if reaches(m.delta_theta, m.kappa) {
            return true;
        }
    }
    for i in 0..360 {
        let roll = 2.0 * PI * i as f64 / 360.0;
        for j in 0..=64 {
            // the roll of a straight arc does not matter
            if j == 0 && i > 0 {
                continue;
            }
            if reaches(roll, kappa_max * j as f64 / 64.0) {
                return true;
            }
        }
    }
    false
}

/// Builds the environment and query for `spec`; deterministic in the seed.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<(Arc<Environment>, PlanningProblem)> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let origin = Vec3::zeros();
    let extent = Vec3::new(spec.dims[0] as f64, spec.dims[1] as f64, spec.dims[2] as f64) * spec.spacing;
    let b = Builder { spec, origin, extent };
    let base = b.base_shapes(&mut rng);
    let cost = b.cost_field(&mut rng);
    let mut last_reason = String::from("no attempt");

    for attempt in 0..spec.max_retries {
        let start_p = b.random_point(&mut rng, spec.margin);
        let dir = unit(&mut rng);
        let start = Pose::looking(start_p, dir);
        let witness = match spec.mode {
            ScenarioMode::Standard => two_arc_witness(&mut rng, spec),
            _ => vec![MotionPrimitive::new(
                rng.gen_range(0.0..=spec.kappa_max),
                range(&mut rng, spec.goal_distance).min(spec.ell_max),
                rng.gen_range(0.0..2.0 * PI),
            )],
        };
        let samples = witness_samples(&start, &witness, 0.5 * spec.spacing);
        let goal = *samples.last().expect("witness has samples");
        let corridor = spec.needle_radius + spec.spacing;
        let near_witness = |s: &Shape| samples.iter().any(|p| s.distance(p) <= corridor);

        let mut shapes = base.clone();
        match spec.mode {
            ScenarioMode::Standard => {
                shapes.retain(|s| !near_witness(s));
                let direct = exact_arc(&start, &goal, spec.kappa_max);
                for _ in 0..spec.blockers {
                    let f = rng.gen_range(0.35..0.65);
                    let c = match direct {
                        Some(m) => apply_primitive(&start, &m.truncated(f * m.delta_ell)).p,
                        None => start.p + f * (goal - start.p),
                    };
                    let clearance = samples.iter().map(|p| (p - c).norm()).fold(f64::INFINITY, f64::min);
                    let r = range(&mut rng, spec.blocker_radius).min(clearance - corridor);
                    if r >= 0.5 * spec.blocker_radius[0] {
                        shapes.push(Shape::Sphere { c, r });
                    }
                }
            }
            ScenarioMode::Sealed => {
                let inner = spec.tau + 2.0 * spec.spacing + spec.needle_radius;
                shapes.retain(|s| !s.contains(&goal));
                shapes.push(Shape::Shell {
                    c: goal,
                    inner,
                    outer: inner + 3.0 * spec.spacing,
                });
            }
            ScenarioMode::Trivial => shapes.retain(|s| !near_witness(s)),
        }
        let env = b.environment(&shapes, cost.clone())?;
        let reject = |why: &str, last: &mut String| {
            log::trace!("attempt {attempt}: {why}");
            *last = why.to_string();
        };
        if !env.is_free(&start.p) || !env.contains(&goal) {
            reject("start blocked or goal outside", &mut last_reason);
            continue;
        }
        if !goal_in_cone(&start, &goal, spec.tau, std::f64::consts::FRAC_PI_2) {
            reject("goal outside the forward cone", &mut last_reason);
            continue;
        }
        if (goal - start.p).norm() <= spec.tau {
            reject("goal within tolerance of start", &mut last_reason);
            continue;
        }
        let problem = PlanningProblem::new(
            Arc::new(env),
            start,
            goal,
            spec.tau,
            spec.ell_max,
            spec.kappa_max,
            spec.cost_kind,
        );
        let env = &problem.env;
        match spec.mode {
            ScenarioMode::Standard => {
                if !witness_free(env, &start, &witness, spec.kappa_max) {
                    reject("witness path collides", &mut last_reason);
                    continue;
                }
                if !witness_turns_ok(&start, &witness, &goal, spec.tau) {
                    reject("witness path violates the turn limit", &mut last_reason);
                    continue;
                }
                if inevitable_collision(env, &start, &goal, &problem.reach_spec(spec.ell_max)) {
                    reject("start has inevitable collision", &mut last_reason);
                    continue;
                }
                if single_arc_connects(env, &start, &goal, spec.tau, spec.kappa_max, spec.ell_max) {
                    reject("trivial: a single arc reaches the goal", &mut last_reason);
                    continue;
                }
            }
            ScenarioMode::Sealed => {
                if !env.is_free(&goal) {
                    reject("goal blocked", &mut last_reason);
                    continue;
                }
            }
            ScenarioMode::Trivial => {
                if !witness_free(env, &start, &witness, spec.kappa_max) {
                    reject("sampled arc collides", &mut last_reason);
                    continue;
                }
            }
        }
        log::debug!("scenario {} accepted after {} attempts", spec.seed, attempt + 1);
        return Ok((problem.env.clone(), problem));
    }
    Err(Error::UnsatisfiableSpec {
        attempts: spec.max_retries,
        reason: last_reason,
    })
}
