//! Cost-to-go heuristic and reachability gates.
//!
//! Everything here works in the plane spanned by the tip tangent and the
//! goal direction. In that plane `a` is the forward coordinate, `b ≥ 0` the
//! lateral one, and the turning circle toward the goal is centered at
//! `(0, R)` with `R = 1/κ_max`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::f64::consts::{FRAC_PI_2, PI};

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::environment::Environment;
use crate::kinematics::{MotionPrimitive, Pose, Trajectory, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachSpec {
    pub kappa_max: f64,
    pub max_turn: f64,
    pub remaining_length: f64,
    pub tau: f64,
}

impl ReachSpec {
    pub fn new(kappa_max: f64, remaining_length: f64, tau: f64) -> Self {
        Self {
            kappa_max,
            max_turn: FRAC_PI_2,
            remaining_length,
            tau,
        }
    }
}

/// Goal expressed in the tip's steering plane.
#[derive(Debug, Clone, Copy)]
struct PlaneGoal {
    a: f64,
    b: f64,
    /// Unit lateral direction in world coordinates.
    lateral: Vec3,
}

fn plane_goal(x: &Pose, g: &Vec3) -> PlaneGoal {
    let t = x.tangent();
    let v = g - x.p;
    let a = v.dot(&t);
    let w = v - a * t;
    let b = w.norm();
    let lateral = if b > 1e-12 * (1.0 + v.norm()) {
        w / b
    } else {
        x.q * Vec3::x()
    };
    PlaneGoal { a, b, lateral }
}

/// Shape of the shortest forward path to a point with free final heading.
#[derive(Debug, Clone, Copy, PartialEq)]
enum PlanePath {
    /// Max-curvature arc of `arc` radians followed by a straight segment.
    Cs { arc: f64, straight: f64 },
    /// Goal inside the turning circle: the single tangent arc through it,
    /// whose radius is below `R` (a lower bound, not a feasible path).
    Inside { radius: f64, angle: f64 },
}

fn plane_path(a: f64, b: f64, r: f64) -> PlanePath {
    let dc2 = a * a + (b - r) * (b - r);
    if dc2 >= r * r {
        let dc = dc2.sqrt();
        let omega = (b - r).atan2(a);
        let beta = (r / dc).clamp(-1.0, 1.0).acos();
        let mut phi = (omega + FRAC_PI_2 - beta).rem_euclid(2.0 * PI);
        // a goal straight ahead lands on phi ≈ 2π through rounding
        if phi > 2.0 * PI - 1e-12 {
            phi = 0.0;
        }
        PlanePath::Cs {
            arc: phi,
            straight: (dc2 - r * r).max(0.0).sqrt(),
        }
    } else {
        PlanePath::Inside {
            radius: (a * a + b * b) / (2.0 * b),
            angle: 2.0 * b.atan2(a),
        }
    }
}

/// Length of the shortest curvature-bounded forward path from `x` to the
/// point `g` with free terminal heading, computed in the steering plane.
pub fn dubins_point_distance(x: &Pose, g: &Vec3, kappa_max: f64) -> f64 {
    let pg = plane_goal(x, g);
    let chord = (g - x.p).norm();
    if kappa_max <= 0.0 {
        return if pg.b <= 1e-12 * (1.0 + chord) && pg.a >= 0.0 {
            pg.a
        } else {
            f64::INFINITY
        };
    }
    let r = 1.0 / kappa_max;
    let len = match plane_path(pg.a, pg.b, r) {
        PlanePath::Cs { arc, straight } => r * arc + straight,
        PlanePath::Inside { radius, angle } => radius * angle,
    };
    len.max(chord)
}

/// `c_min · max(0, d − τ)` with `d` the planar bounded-curvature distance.
pub fn heuristic(x: &Pose, g: &Vec3, tau: f64, kappa_max: f64, c_min: f64) -> f64 {
    if (g - x.p).norm() <= tau {
        return 0.0;
    }
    c_min * (dubins_point_distance(x, g, kappa_max) - tau).max(0.0)
}

/// Angle between the tangent of `x` and the direction to `g`.
pub fn goal_angle(x: &Pose, g: &Vec3) -> f64 {
    let v = g - x.p;
    let n = v.norm();
    if n == 0.0 {
        return 0.0;
    }
    (v.dot(&x.tangent()) / n).clamp(-1.0, 1.0).acos()
}

/// The turn constraint: the goal is within `max_turn` of the tangent or
/// already within `tau`.
pub fn goal_in_cone(x: &Pose, g: &Vec3, tau: f64, max_turn: f64) -> bool {
    (g - x.p).norm() <= tau || goal_angle(x, g) <= max_turn
}

pub fn goal_reachable(x: &Pose, g: &Vec3, spec: &ReachSpec) -> bool {
    if (g - x.p).norm() <= spec.tau {
        return true;
    }
    goal_angle(x, g) <= spec.max_turn
        && dubins_point_distance(x, g, spec.kappa_max) <= spec.remaining_length + spec.tau
}

pub fn olive_diameter(pv: &Vec3, g: &Vec3, tau: f64, kappa_max: f64) -> f64 {
    (2.0 / kappa_max).max(tau + (pv - g).norm())
}

/// Membership of `w` in the spindle swept by rotating the minor arcs of
/// diameter `d` through `pv` and `g` about their chord, or within `tau` of
/// the chord segment.
pub fn olive_contains(pv: &Vec3, g: &Vec3, tau: f64, kappa_max: f64, w: &Vec3) -> bool {
    let axis = g - pv;
    let c = axis.norm();
    let rel = w - pv;
    if c == 0.0 {
        return rel.norm() <= tau;
    }
    let e = axis / c;
    let u = rel.dot(&e);
    let r = (rel - u * e).norm();
    let seg = if u < 0.0 {
        rel.norm()
    } else if u > c {
        (w - g).norm()
    } else {
        r
    };
    if seg <= tau {
        return true;
    }
    if u < 0.0 || u > c {
        return false;
    }
    let half = 0.5 * olive_diameter(pv, g, tau, kappa_max);
    let h = (half * half - 0.25 * c * c).max(0.0).sqrt();
    let du = u - 0.5 * c;
    let dr = r + h;
    (du * du + dr * dr).sqrt() <= half
}

/// Region growing over free voxels that a continuation of `x` could pass
/// through. Returns true when the grown region never comes within `tau` of
/// the goal.
///
/// The region is the length ellipsoid `|w − p| + |w − g| ≤ remaining + τ`,
/// cut by the forward half-space of the tip while the remaining length is
/// below half a turning circle (a bounded-curvature path cannot get behind
/// its start before that). Growth is 26-connected because consecutive
/// collision samples of an edge may cross voxel corners, and every region
/// and goal test is widened by half a voxel diagonal, so the grown set
/// contains the voxels of every feasible continuation.
pub fn inevitable_collision(env: &Environment, x: &Pose, g: &Vec3, spec: &ReachSpec) -> bool {
    if (g - x.p).norm() <= spec.tau {
        return false;
    }
    let Some(seed) = env.voxel_of(&x.p) else {
        return true;
    };
    let slack = env.spacing() * 3f64.sqrt() * 0.5;
    let goal_radius = spec.tau + slack;
    let budget = spec.remaining_length + spec.tau + 2.0 * slack;
    let half_space = spec.remaining_length <= PI / spec.kappa_max;
    let t = x.tangent();
    let dims = env.dims();
    // Greedy order toward the goal: reachability does not depend on visit
    // order, and in open tissue the goal is met after a thin tube of voxels.
    let key = |v: [usize; 3]| {
        let c = env.voxel_center(v[0], v[1], v[2]);
        (Reverse(OrderedFloat((c - g).norm())), Reverse(env.index(v[0], v[1], v[2])))
    };
    let mut seen = HashSet::new();
    let mut queue = BinaryHeap::new();
    seen.insert(env.index(seed[0], seed[1], seed[2]));
    queue.push((key(seed), seed));
    while let Some(((Reverse(dist), _), v)) = queue.pop() {
        if dist.0 <= goal_radius {
            return false;
        }
        for d in NEIGHBORS_26 {
            let mut n = v;
            let mut inside = true;
            for a in 0..3 {
                let coord = v[a] as i64 + d[a];
                if coord < 0 || coord >= dims[a] as i64 {
                    inside = false;
                    break;
                }
                n[a] = coord as usize;
            }
            if !inside {
                continue;
            }
            let idx = env.index(n[0], n[1], n[2]);
            if !seen.insert(idx) {
                continue;
            }
            if env.is_inflated(n) {
                continue;
            }
            let w = env.voxel_center(n[0], n[1], n[2]);
            if half_space && t.dot(&(w - x.p)) < -slack {
                continue;
            }
            if (w - x.p).norm() + (w - g).norm() > budget {
                continue;
            }
            queue.push((key(n), n));
        }
    }
    true
}

const NEIGHBORS_26: [[i64; 3]; 26] = {
    let mut out = [[0i64; 3]; 26];
    let mut k = 0;
    let mut i = 0;
    while i < 27 {
        if i != 13 {
            out[k] = [(i / 9) as i64 - 1, ((i / 3) % 3) as i64 - 1, (i % 3) as i64 - 1];
            k += 1;
        }
        i += 1;
    }
    out
};

/// The planar shortest path to the goal as one or two primitives, shortened
/// to stop at the tolerance sphere when it ends in a straight segment.
/// Returns `None` when that path is infeasible, too long, or collides.
pub fn direct_goal_connect(
    env: &Environment,
    x: &Pose,
    g: &Vec3,
    tau: f64,
    kappa_max: f64,
    ell_remaining: f64,
) -> Option<Trajectory> {
    if (g - x.p).norm() <= tau {
        return Some(Trajectory::empty(*x));
    }
    let prims = goal_primitives(x, g, tau, kappa_max)?;
    let traj = Trajectory::new(*x, prims);
    if traj.length() > ell_remaining || (traj.end().p - g).norm() > tau {
        return None;
    }
    let mut at = *x;
    for m in &traj.primitives {
        if !env.edge_collision_free(&at, m, kappa_max) {
            return None;
        }
        at = crate::kinematics::apply_primitive(&at, m);
    }
    Some(traj)
}

/// Primitive sequence realizing the planar shortest path toward `g`.
pub fn goal_primitives(x: &Pose, g: &Vec3, tau: f64, kappa_max: f64) -> Option<Vec<MotionPrimitive>> {
    let pg = plane_goal(x, g);
    let local = x.q.inverse() * pg.lateral;
    let roll = local.y.atan2(local.x);
    let r = 1.0 / kappa_max;
    let (arc, straight) = match plane_path(pg.a, pg.b, r) {
        PlanePath::Cs { arc, straight } => (arc, straight),
        PlanePath::Inside { .. } => return None,
    };
    let mut out = Vec::with_capacity(2);
    if arc * r > 1e-12 {
        out.push(MotionPrimitive::new(kappa_max, arc * r, roll));
    }
    // stop just inside the tolerance sphere
    let trim = straight.min(tau * (1.0 - 1e-9));
    let s = straight - trim;
    if s > 1e-12 {
        out.push(MotionPrimitive::straight(s));
    }
    Some(out)
}
