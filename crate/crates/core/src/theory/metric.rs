//! Action-space metric, Lipschitz estimation and pruning drift.

use std::f64::consts::PI;

use nalgebra::{Unit, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{apply_primitive, pose_distance, MotionPrimitive, Pose, Vec3};

/// Sampled supremum of `ρ(σ₁(min(s, ℓ₁)), σ₂(min(s, ℓ₂)))` over
/// `s ∈ [0, max(ℓ₁, ℓ₂)]`, both primitives applied to the identity pose.
/// Below `min(ℓ₁, ℓ₂)` this is the shared-domain regime; above it the
/// shorter trajectory stays at its endpoint.
pub fn action_distance(m1: &MotionPrimitive, m2: &MotionPrimitive, alpha: f64) -> f64 {
    let (l1, l2) = (m1.delta_ell, m2.delta_ell);
    let lmax = l1.max(l2);
    let h = (l1.min(l2).max(1e-6) / 10.0).min(0.05);
    let n = (lmax / h).ceil() as u64;
    let x = Pose::identity();
    let mut worst: f64 = 0.0;
    for k in 0..=n {
        let s = (k as f64 * h).min(lmax);
        let a = apply_primitive(&x, &m1.truncated(s.min(l1)));
        let b = apply_primitive(&x, &m2.truncated(s.min(l2)));
        worst = worst.max(pose_distance(&a, &b, alpha));
    }
    worst
}

/// Sampling ranges for the Lipschitz estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzSetup {
    pub kappa_max: f64,
    pub delta_ell_max: f64,
    pub alpha: f64,
    /// Largest pose perturbation, in metric units.
    pub perturbation: f64,
}

impl LipschitzSetup {
    pub fn new(kappa_max: f64, delta_ell_max: f64, alpha: f64) -> Self {
        Self {
            kappa_max,
            delta_ell_max,
            alpha,
            perturbation: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    /// Largest observed ratio, never below 1.
    pub raw: f64,
    /// `1.5 · raw`.
    pub value: f64,
    pub samples: u64,
}

pub const LIPSCHITZ_SAFETY: f64 = 1.5;

fn random_axis(rng: &mut ChaCha8Rng) -> Unit<Vec3> {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return Unit::new_normalize(v);
        }
    }
}

fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    let q = UnitQuaternion::from_axis_angle(&random_axis(rng), rng.gen_range(0.0..PI));
    let p = Vec3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
    Pose::new(p, q)
}

/// Moves `x` by exactly `d` in the pose metric, splitting `d` randomly
/// between translation and rotation.
pub(crate) fn perturb(x: &Pose, d: f64, alpha: f64, rng: &mut ChaCha8Rng) -> Pose {
    let share: f64 = if alpha > 0.0 { rng.gen_range(0.0..=1.0) } else { 1.0 };
    let dp = share * d;
    let angle = if alpha > 0.0 { ((1.0 - share) * d / alpha).min(PI) } else { 0.0 };
    let rot = UnitQuaternion::from_axis_angle(&random_axis(rng), angle);
    Pose::new(x.p + random_axis(rng).into_inner() * dp, x.q * rot)
}

fn random_primitive(rng: &mut ChaCha8Rng, s: &LipschitzSetup) -> MotionPrimitive {
    MotionPrimitive::new(
        rng.gen_range(0.0..=s.kappa_max),
        rng.gen_range(1e-3..=s.delta_ell_max),
        rng.gen_range(0.0..2.0 * PI),
    )
}

fn nearby_primitive(rng: &mut ChaCha8Rng, m: &MotionPrimitive, s: &LipschitzSetup) -> MotionPrimitive {
    let scale: f64 = rng.gen_range(0.0..=1.0);
    MotionPrimitive::new(
        (m.kappa + scale * rng.gen_range(-0.1..=0.1) * s.kappa_max).clamp(0.0, s.kappa_max),
        (m.delta_ell + scale * rng.gen_range(-1.0..=1.0)).clamp(1e-3, s.delta_ell_max),
        (m.delta_theta + scale * rng.gen_range(-0.2..=0.2)).rem_euclid(2.0 * PI),
    )
}

/// Ratio `ρ(x₁⊕m₁, x₂⊕m₂) / (ρ(x₁, x₂) + ρ_A(m₁, m₂))`, or `None` for a
/// zero denominator.
pub fn lipschitz_ratio(x1: &Pose, x2: &Pose, m1: &MotionPrimitive, m2: &MotionPrimitive, alpha: f64) -> Option<f64> {
    let den = pose_distance(x1, x2, alpha) + action_distance(m1, m2, alpha);
    if den <= 1e-12 {
        return None;
    }
    let num = pose_distance(&apply_primitive(x1, m1), &apply_primitive(x2, m2), alpha);
    Some(num / den)
}

/// Empirical Lipschitz constant over random nearby pose and primitive pairs,
/// inflated by `LIPSCHITZ_SAFETY`. A pure translation sample always
/// contributes, so the raw value is at least 1.
pub fn estimate_lipschitz(n_samples: u64, seed: u64, setup: &LipschitzSetup) -> Result<LipschitzEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw: f64 = 1.0;
    for i in 0..n_samples {
        let x1 = random_pose(&mut rng);
        let m1 = random_primitive(&mut rng, setup);
        let d = rng.gen_range(1e-4..=setup.perturbation);
        let (x2, m2) = if i == 0 {
            (Pose::new(x1.p + Vec3::new(d, 0.0, 0.0), x1.q), m1)
        } else {
            let m2 = if rng.gen_bool(0.5) { m1 } else { nearby_primitive(&mut rng, &m1, setup) };
            (perturb(&x1, d, setup.alpha, &mut rng), m2)
        };
        if let Some(r) = lipschitz_ratio(&x1, &x2, &m1, &m2, setup.alpha) {
            raw = raw.max(r);
        }
    }
    Ok(LipschitzEstimate {
        raw,
        value: LIPSCHITZ_SAFETY * raw,
        samples: n_samples,
    })
}

/// Accumulated error after `n` similar-node replacements:
/// `ξ = (L_sⁿ − 1)/(L_s − 1)·d_sim`.
pub fn pruning_error_bound(l_s: f64, n: u32, d_sim: f64) -> Result<f64> {
    if !(l_s > 1.0) {
        return Err(Error::InvalidArgument(format!("L_s must exceed 1 (got {l_s})")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok((l_s.powi(n as i32) - 1.0) / (l_s - 1.0) * d_sim)
}

/// One replayed chain: the reference and the replaced endpoint distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainReplay {
    pub n: u32,
    pub drift: f64,
    pub bound: f64,
}

/// Replays `n` replacements along a chain of `n` nodes joined by `n − 1`
/// random primitives: every node of the replayed copy is swapped for a node
/// at distance `d_sim`, the last one included. Reports the final distance
/// against `pruning_error_bound`.
pub fn replay_pruning_chain(
    n: u32,
    d_sim: f64,
    l_s: f64,
    setup: &LipschitzSetup,
    seed: u64,
) -> Result<ChainReplay> {
    let bound = pruning_error_bound(l_s, n, d_sim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = random_pose(&mut rng);
    let mut y = perturb(&x, d_sim, setup.alpha, &mut rng);
    for _ in 1..n {
        let m = random_primitive(&mut rng, setup);
        x = apply_primitive(&x, &m);
        y = perturb(&apply_primitive(&y, &m), d_sim, setup.alpha, &mut rng);
    }
    Ok(ChainReplay {
        n,
        drift: pose_distance(&x, &y, setup.alpha),
        bound,
    })
}
