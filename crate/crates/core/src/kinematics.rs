//! Constant-curvature arc kinematics for a bevel-tip needle.
//!
//! Frame convention: local +z is the insertion tangent. A primitive first
//! rolls the tip frame by `delta_theta` about +z, after which the bevel
//! curves the path toward local +x (rotation about +y).

use std::f64::consts::PI;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Vec3 = Vector3<f64>;
pub type Quat = UnitQuaternion<f64>;

/// Needle tip state: position in mm and unit orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub p: Vec3,
    pub q: Quat,
}

impl Pose {
    pub fn new(p: Vec3, q: Quat) -> Self {
        Self { p, q: canonical(q) }
    }

    pub fn identity() -> Self {
        Self::new(Vec3::zeros(), Quat::identity())
    }

    pub fn at(p: Vec3) -> Self {
        Self::new(p, Quat::identity())
    }

    /// Pose at `p` whose tangent points along `dir` (need not be unit).
    pub fn looking(p: Vec3, dir: Vec3) -> Self {
        let q = Quat::rotation_between(&Vec3::z(), &dir).unwrap_or_else(|| {
            // antiparallel: half turn about x
            Quat::from_axis_angle(&Vec3::x_axis(), PI)
        });
        Self::new(p, q)
    }

    /// Insertion direction (local +z in world frame).
    pub fn tangent(&self) -> Vec3 {
        self.q * Vec3::z()
    }

    /// Quaternion components as `[w, x, y, z]`.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.q.quaternion();
        [q.w, q.i, q.j, q.k]
    }
}

fn canonical(q: Quat) -> Quat {
    let raw = q.into_inner();
    let raw = if raw.w < 0.0 { -raw } else { raw };
    UnitQuaternion::new_normalize(raw)
}

fn rot_z(angle: f64) -> Quat {
    Quat::from_axis_angle(&Vec3::z_axis(), angle)
}

fn rot_y(angle: f64) -> Quat {
    Quat::from_axis_angle(&Vec3::y_axis(), angle)
}

/// `(kappa, delta_ell, delta_theta)` plus the dyadic resolution levels it
/// was generated at. Primitives built outside the lattice carry levels 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionPrimitive {
    pub kappa: f64,
    pub delta_ell: f64,
    pub delta_theta: f64,
    pub ell_level: u32,
    pub theta_level: u32,
}

impl MotionPrimitive {
    pub fn new(kappa: f64, delta_ell: f64, delta_theta: f64) -> Self {
        Self::with_levels(kappa, delta_ell, delta_theta, 0, 0)
    }

    pub fn with_levels(
        kappa: f64,
        delta_ell: f64,
        delta_theta: f64,
        ell_level: u32,
        theta_level: u32,
    ) -> Self {
        Self {
            kappa,
            delta_ell,
            delta_theta: wrap_angle(delta_theta),
            ell_level,
            theta_level,
        }
    }

    pub fn straight(delta_ell: f64) -> Self {
        Self::new(0.0, delta_ell, 0.0)
    }

    /// Same primitive truncated to arc length `s`.
    pub fn truncated(&self, s: f64) -> Self {
        Self {
            delta_ell: s,
            ..*self
        }
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let w = a.rem_euclid(two_pi);
    if w >= two_pi {
        0.0
    } else {
        w
    }
}

/// The `x ⊕ m` operator: pose reached after applying `m` at `x`.
pub fn apply_primitive(x: &Pose, m: &MotionPrimitive) -> Pose {
    let q1 = x.q * rot_z(m.delta_theta);
    if m.kappa == 0.0 {
        return Pose::new(x.p + q1 * Vec3::new(0.0, 0.0, m.delta_ell), q1);
    }
    let turn = m.kappa * m.delta_ell;
    let half = 0.5 * turn;
    // (1 - cos t)/k written as 2 sin^2(t/2)/k for small-curvature accuracy
    let local = Vec3::new(
        2.0 * half.sin() * half.sin() / m.kappa,
        0.0,
        turn.sin() / m.kappa,
    );
    Pose::new(x.p + q1 * local, q1 * rot_y(turn))
}

/// Angle of the relative rotation between two orientations, in `[0, π]`.
pub fn angular_distance(qa: &Quat, qb: &Quat) -> f64 {
    // evaluate in a fixed argument order so the result is exactly symmetric
    let (qa, qb) = if qa.coords.as_slice() <= qb.coords.as_slice() {
        (qa, qb)
    } else {
        (qb, qa)
    };
    let r = (qa.inverse() * qb).into_inner();
    2.0 * r.imag().norm().atan2(r.w.abs())
}

/// `ρ(a, b) = ‖p_a − p_b‖ + α·angle(q_a, q_b)`.
pub fn pose_distance(a: &Pose, b: &Pose, alpha: f64) -> f64 {
    (a.p - b.p).norm() + alpha * angular_distance(&a.q, &b.q)
}

/// A start pose followed by an ordered list of primitives.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: Pose,
    pub primitives: Vec<MotionPrimitive>,
}

impl Trajectory {
    pub fn new(start: Pose, primitives: Vec<MotionPrimitive>) -> Self {
        Self { start, primitives }
    }

    pub fn empty(start: Pose) -> Self {
        Self::new(start, Vec::new())
    }

    pub fn length(&self) -> f64 {
        self.primitives.iter().map(|m| m.delta_ell).sum()
    }

    /// Poses at primitive boundaries, starting with `start`.
    pub fn waypoints(&self) -> Vec<Pose> {
        let mut out = Vec::with_capacity(self.primitives.len() + 1);
        let mut x = self.start;
        out.push(x);
        for m in &self.primitives {
            x = apply_primitive(&x, m);
            out.push(x);
        }
        out
    }

    pub fn end(&self) -> Pose {
        self.primitives
            .iter()
            .fold(self.start, |x, m| apply_primitive(&x, m))
    }

    /// Pose at arc length `s`, clamped to `[0, length]`. At an interior
    /// primitive boundary this is the frame after that primitive's roll.
    pub fn pose_at(&self, s: f64) -> Pose {
        if s <= 0.0 {
            return self.start;
        }
        let mut x = self.start;
        let mut remaining = s.max(0.0);
        for m in &self.primitives {
            if remaining < m.delta_ell {
                return apply_primitive(&x, &m.truncated(remaining));
            }
            remaining -= m.delta_ell;
            x = apply_primitive(&x, m);
        }
        x
    }

    /// Samples at `0, h, 2h, …` plus the endpoint.
    pub fn sample(&self, spacing: f64) -> Vec<(f64, Pose)> {
        assert!(spacing > 0.0, "sample spacing must be positive");
        let total = self.length();
        let mut out = Vec::new();
        let mut k = 0u64;
        loop {
            let s = k as f64 * spacing;
            if s >= total - 1e-12 {
                break;
            }
            out.push((s, self.pose_at(s)));
            k += 1;
        }
        if out.is_empty() || total > 0.0 {
            out.push((total, self.end()));
        }
        out
    }

    pub fn concat(&self, other: &[MotionPrimitive]) -> Trajectory {
        let mut prims = self.primitives.clone();
        prims.extend_from_slice(other);
        Trajectory::new(self.start, prims)
    }
}

// ---- JSON forms -----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    p: [f64; 3],
    q: [f64; 4],
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            p: [self.p.x, self.p.y, self.p.z],
            q: self.wxyz(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = PoseRepr::deserialize(d)?;
        let raw = Quaternion::new(r.q[0], r.q[1], r.q[2], r.q[3]);
        if !(raw.norm() > 0.0) {
            return Err(D::Error::custom("zero quaternion"));
        }
        Ok(Pose::new(
            Vec3::new(r.p[0], r.p[1], r.p[2]),
            UnitQuaternion::new_normalize(raw),
        ))
    }
}

impl Serialize for MotionPrimitive {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (
            self.kappa,
            self.delta_ell,
            self.delta_theta,
            self.ell_level,
            self.theta_level,
        )
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MotionPrimitive {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (k, l, t, a, b) = <(f64, f64, f64, u32, u32)>::deserialize(d)?;
        Ok(MotionPrimitive::with_levels(k, l, t, a, b))
    }
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRepr {
    start: Pose,
    primitives: Vec<MotionPrimitive>,
    #[serde(default)]
    length: f64,
}

impl Serialize for Trajectory {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TrajectoryRepr {
            start: self.start,
            primitives: self.primitives.clone(),
            length: self.length(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Trajectory {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = TrajectoryRepr::deserialize(d)?;
        Ok(Trajectory::new(r.start, r.primitives))
    }
}
