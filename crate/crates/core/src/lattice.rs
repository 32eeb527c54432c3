//! Multi-resolution primitive lattice.
//!
//! Lengths live on the dyadic grid `δℓ_max / 2^a`, axial rotations on
//! `(π/2) / 2^b`. Curvatures are restricted to `{0, κ_max}`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::kinematics::{wrap_angle, MotionPrimitive};

/// Cutoff resolution `{δℓ_min, δθ_min}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub delta_ell_min: f64,
    pub delta_theta_min: f64,
}

impl Resolution {
    pub fn new(delta_ell_min: f64, delta_theta_min: f64) -> Self {
        Self {
            delta_ell_min,
            delta_theta_min,
        }
    }

    pub fn is_valid(&self, delta_ell_max: f64) -> bool {
        self.delta_ell_min > 0.0 && self.delta_theta_min > 0.0 && self.delta_ell_min <= delta_ell_max
    }

    /// Finest length level allowed by the cutoff.
    pub fn max_ell_level(&self, delta_ell_max: f64) -> u32 {
        let mut a = 0;
        while delta_ell_max / 2f64.powi(a as i32 + 1) >= self.delta_ell_min {
            a += 1;
        }
        a
    }

    /// Finest rotation level allowed by the cutoff.
    pub fn max_theta_level(&self) -> u32 {
        let mut b = 0;
        while FRAC_PI_2 / 2f64.powi(b as i32 + 1) >= self.delta_theta_min {
            b += 1;
        }
        b
    }
}

/// Node rank: tree depth plus accumulated resolution levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Rank(pub u32);

impl Rank {
    pub const ROOT: Rank = Rank(0);
}

pub fn node_rank(parent: Rank, m: &MotionPrimitive) -> Rank {
    Rank(parent.0 + 1 + m.ell_level + m.theta_level)
}

/// The five coarsest primitives: one straight insertion plus a maximum
/// curvature arc in each of the four axial directions.
pub fn coarsest_primitives(kappa_max: f64, delta_ell_max: f64) -> Vec<MotionPrimitive> {
    let mut out = vec![MotionPrimitive::with_levels(0.0, delta_ell_max, 0.0, 0, 0)];
    for i in 0..4 {
        out.push(MotionPrimitive::with_levels(
            kappa_max,
            delta_ell_max,
            i as f64 * FRAC_PI_2,
            0,
            0,
        ));
    }
    out
}

/// One dyadic level finer in each axis, `±` a half step.
pub fn refine_primitives(m: &MotionPrimitive, delta_ell_max: f64) -> Vec<MotionPrimitive> {
    let mut out = Vec::with_capacity(4);
    let a = m.ell_level + 1;
    let dl = delta_ell_max / 2f64.powi(a as i32);
    for sign in [-1.0, 1.0] {
        let len = m.delta_ell + sign * dl;
        if len > 1e-12 * delta_ell_max && len <= delta_ell_max * (1.0 + 1e-12) {
            out.push(MotionPrimitive::with_levels(
                m.kappa,
                len,
                m.delta_theta,
                a,
                m.theta_level,
            ));
        }
    }
    if m.kappa != 0.0 {
        let b = m.theta_level + 1;
        let dt = FRAC_PI_2 / 2f64.powi(b as i32);
        for sign in [1.0, -1.0] {
            out.push(MotionPrimitive::with_levels(
                m.kappa,
                m.delta_ell,
                wrap_angle(m.delta_theta + sign * dt),
                m.ell_level,
                b,
            ));
        }
    }
    out
}

pub fn valid_resolution(m: &MotionPrimitive, r: &Resolution, delta_ell_max: f64) -> bool {
    delta_ell_max / 2f64.powi(m.ell_level as i32) >= r.delta_ell_min
        && FRAC_PI_2 / 2f64.powi(m.theta_level as i32) >= r.delta_theta_min
}

/// Fixed finest level used to express dyadic numerators exactly.
const KEY_LEVEL: i32 = 40;

/// Exact identity of a primitive's geometric action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimitiveKey {
    pub kappa_bits: u64,
    pub ell: u64,
    pub theta: u64,
}

pub fn canonical_key(m: &MotionPrimitive, delta_ell_max: f64) -> PrimitiveKey {
    let scale = 2f64.powi(KEY_LEVEL);
    let ell = (m.delta_ell / delta_ell_max * scale).round() as u64;
    let theta = if m.kappa == 0.0 {
        0
    } else {
        let full = 4 * (1u64 << KEY_LEVEL);
        ((m.delta_theta / FRAC_PI_2 * scale).round() as u64) % full
    };
    PrimitiveKey {
        kappa_bits: if m.kappa == 0.0 { 0 } else { m.kappa.to_bits() },
        ell,
        theta,
    }
}

/// `{(κ, r_ℓ, n·r_θ) : κ ∈ K, n ∈ [0, ⌊2π/r_θ⌋]}`.
pub fn finest_set(r: &Resolution, curvatures: &[f64]) -> Vec<MotionPrimitive> {
    let count = (2.0 * PI / r.delta_theta_min + 1e-12).floor() as u64;
    let mut out = Vec::new();
    for &kappa in curvatures {
        for n in 0..=count {
            out.push(MotionPrimitive::new(
                kappa,
                r.delta_ell_min,
                n as f64 * r.delta_theta_min,
            ));
        }
    }
    out
}

/// Every lattice primitive at or above the cutoff, one per canonical key,
/// in a deterministic order. This is the per-parent action set the
/// refinement scheme eventually reaches.
pub fn all_primitives(kappa_max: f64, delta_ell_max: f64, r: &Resolution) -> Vec<MotionPrimitive> {
    let amax = r.max_ell_level(delta_ell_max);
    let bmax = r.max_theta_level();
    let mut out = Vec::new();
    for a in 0..=amax {
        let step = delta_ell_max / 2f64.powi(a as i32);
        let count = 1u64 << a;
        for i in 1..=count {
            // odd multiples are new at this level
            if a > 0 && i % 2 == 0 {
                continue;
            }
            let len = i as f64 * step;
            out.push(MotionPrimitive::with_levels(0.0, len, 0.0, a, 0));
            for b in 0..=bmax {
                let tstep = FRAC_PI_2 / 2f64.powi(b as i32);
                let tcount = 4u64 << b;
                for j in 0..tcount {
                    if b > 0 && j % 2 == 0 {
                        continue;
                    }
                    out.push(MotionPrimitive::with_levels(
                        kappa_max,
                        len,
                        j as f64 * tstep,
                        a,
                        b,
                    ));
                }
            }
        }
    }
    out
}
