//! Voxelized workspace: obstacle occupancy, needle-radius inflation, a
//! trilinearly interpolated cost field, and collision queries.
//!
//! Voxel `(i, j, k)` has its center at `origin + spacing·(i, j, k)`; the
//! workspace is the union of voxel cubes, so it spans
//! `[origin − spacing/2, origin + (n − ½)·spacing]` on each axis.

mod edt;
mod io;
pub mod scenario;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kinematics::{MotionPrimitive, Pose, Trajectory, Vec3};

pub use io::{load_env, save_env, Manifest, MAGIC};
pub use scenario::{generate_scenario, CostSpec, ScenarioMode, ScenarioSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    origin: Vec3,
    spacing: f64,
    dims: [usize; 3],
    occupancy: Vec<bool>,
    inflated: Vec<bool>,
    cost: Vec<f32>,
    needle_radius: f64,
    c_min: f64,
    c_max: f64,
    clamped: bool,
}

impl Environment {
    /// Builds an environment, clamping costs into `[c_min, c_max]` and
    /// inflating obstacles by `needle_radius`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        origin: Vec3,
        spacing: f64,
        dims: [usize; 3],
        occupancy: Vec<bool>,
        mut cost: Vec<f32>,
        needle_radius: f64,
        c_min: f64,
        c_max: f64,
    ) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        if !(spacing > 0.0) || n == 0 {
            return Err(Error::Manifest("spacing and dims must be positive".into()));
        }
        if !(c_min > 0.0) || !(c_max >= c_min) {
            return Err(Error::Manifest(format!(
                "cost bounds must satisfy 0 < c_min <= c_max, got [{c_min}, {c_max}]"
            )));
        }
        if occupancy.len() != n || cost.len() != n {
            return Err(Error::Manifest(format!(
                "grid sizes {}/{} disagree with dims {:?}",
                occupancy.len(),
                cost.len(),
                dims
            )));
        }
        if needle_radius < 0.0 {
            return Err(Error::Manifest("needle_radius must be non-negative".into()));
        }
        let (lo, hi) = (c_min as f32, c_max as f32);
        let mut clamped = false;
        for c in cost.iter_mut() {
            if !(*c >= lo) {
                *c = lo;
                clamped = true;
            } else if *c > hi {
                *c = hi;
                clamped = true;
            }
        }
        let inflated = inflate(&occupancy, dims, needle_radius / spacing);
        Ok(Self {
            origin,
            spacing,
            dims,
            occupancy,
            inflated,
            cost,
            needle_radius,
            c_min,
            c_max,
            clamped,
        })
    }

    /// Obstacle-free grid of constant cost.
    pub fn uniform(origin: Vec3, spacing: f64, dims: [usize; 3], cost: f64) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        Self::new(
            origin,
            spacing,
            dims,
            vec![false; n],
            vec![cost as f32; n],
            0.0,
            cost,
            cost,
        )
        .expect("uniform environment parameters are valid")
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }
    pub fn needle_radius(&self) -> f64 {
        self.needle_radius
    }
    pub fn c_min(&self) -> f64 {
        self.c_min
    }
    pub fn c_max(&self) -> f64 {
        self.c_max
    }
    /// Set when construction or loading had to clamp stored costs.
    pub fn cost_was_clamped(&self) -> bool {
        self.clamped
    }
    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }
    pub fn inflated(&self) -> &[bool] {
        &self.inflated
    }
    pub fn costs(&self) -> &[f32] {
        &self.cost
    }

    /// Lipschitz constant of `point_cost` with respect to position.
    pub fn cost_lipschitz(&self) -> f64 {
        (self.c_max - self.c_min) * 3f64.sqrt() / self.spacing
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.spacing
    }

    pub fn lower_corner(&self) -> Vec3 {
        self.origin - Vec3::repeat(0.5 * self.spacing)
    }

    pub fn upper_corner(&self) -> Vec3 {
        let n = Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64);
        self.origin + (n - Vec3::repeat(0.5)) * self.spacing
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let (lo, hi) = (self.lower_corner(), self.upper_corner());
        (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a])
    }

    /// Voxel whose cube contains `p`, if any.
    pub fn voxel_of(&self, p: &Vec3) -> Option<[usize; 3]> {
        if !self.contains(p) {
            return None;
        }
        let g = (p - self.origin) / self.spacing;
        let mut out = [0usize; 3];
        for a in 0..3 {
            out[a] = (g[a].round().max(0.0) as usize).min(self.dims[a] - 1);
        }
        Some(out)
    }

    pub fn is_occupied(&self, v: [usize; 3]) -> bool {
        self.occupancy[self.index(v[0], v[1], v[2])]
    }

    pub fn is_inflated(&self, v: [usize; 3]) -> bool {
        self.inflated[self.index(v[0], v[1], v[2])]
    }

    /// False outside the workspace or inside the inflated obstacle set.
    pub fn is_free(&self, p: &Vec3) -> bool {
        match self.voxel_of(p) {
            Some(v) => !self.is_inflated(v),
            None => false,
        }
    }

    /// Trilinear interpolation of voxel costs.
    pub fn point_cost(&self, p: &Vec3) -> Result<f64> {
        if !self.contains(p) {
            return Err(Error::OutOfWorkspace {
                x: p.x,
                y: p.y,
                z: p.z,
            });
        }
        Ok(self.interpolate(p))
    }

    /// Like `point_cost` but clamps `p` into the grid instead of failing.
    pub fn point_cost_clamped(&self, p: &Vec3) -> f64 {
        self.interpolate(p)
    }

    fn interpolate(&self, p: &Vec3) -> f64 {
        let g = (p - self.origin) / self.spacing;
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let n = self.dims[a];
            let x = g[a].clamp(0.0, (n - 1) as f64);
            if n == 1 {
                continue;
            }
            let i0 = (x.floor() as usize).min(n - 2);
            base[a] = i0;
            frac[a] = x - i0 as f64;
        }
        let step = |a: usize| usize::from(self.dims[a] > 1);
        let mut acc = 0.0;
        for dz in 0..=step(2) {
            let wz = if dz == 1 { frac[2] } else { 1.0 - frac[2] };
            for dy in 0..=step(1) {
                let wy = if dy == 1 { frac[1] } else { 1.0 - frac[1] };
                for dx in 0..=step(0) {
                    let wx = if dx == 1 { frac[0] } else { 1.0 - frac[0] };
                    let idx = self.index(base[0] + dx, base[1] + dy, base[2] + dz);
                    acc += wx * wy * wz * self.cost[idx] as f64;
                }
            }
        }
        acc.clamp(self.c_min, self.c_max)
    }

    /// Sample step used for edge collision checks.
    pub fn collision_step(&self, kappa_max: f64) -> f64 {
        let mut h = 0.5 * self.spacing;
        if kappa_max > 0.0 {
            h = h.min(0.25 / kappa_max);
        }
        h
    }

    /// Checks the arc of `m` from `x` at the collision step, endpoints
    /// included. Between consecutive samples every voxel cell touched by the
    /// chord, widened by the arc's sagitta, must also be free, so no finer
    /// sampling of the arc can find a collision this check misses.
    pub fn edge_collision_free(&self, x: &Pose, m: &MotionPrimitive, kappa_max: f64) -> bool {
        let h = self.collision_step(kappa_max);
        let tol = h * h * m.kappa / 8.0 + 1e-9 * self.spacing;
        let mut prev: Option<Vec3> = None;
        for p in arc_positions(x, m, h) {
            if !self.is_free(&p) {
                return false;
            }
            if let Some(a) = prev {
                if !self.segment_free(&a, &p, tol) {
                    return false;
                }
            }
            prev = Some(p);
        }
        true
    }

    /// Whether every cell within `tol` of the segment is inside the grid and
    /// not inflated. Cells are tested as boxes grown by `tol` per axis.
    fn segment_free(&self, a: &Vec3, b: &Vec3, tol: f64) -> bool {
        let s = self.spacing;
        let cell = |v: f64, o: f64| ((v - o) / s + 0.5).floor() as i64;
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for k in 0..3 {
            lo[k] = cell(a[k].min(b[k]) - tol, self.origin[k]);
            hi[k] = cell(a[k].max(b[k]) + tol, self.origin[k]);
        }
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    let c = [i, j, k];
                    let center = self.origin + Vec3::new(i as f64, j as f64, k as f64) * s;
                    if !segment_meets_box(a, b, &(center - Vec3::repeat(0.5 * s + tol)), &(center + Vec3::repeat(0.5 * s + tol))) {
                        continue;
                    }
                    let inside = (0..3).all(|d| c[d] >= 0 && c[d] < self.dims[d] as i64);
                    if !inside || self.is_inflated([i as usize, j as usize, k as usize]) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Quadrature step for cost integrals.
    pub fn quadrature_step(&self) -> f64 {
        0.5 * self.spacing
    }

    /// Cost integral along one primitive (composite trapezoid).
    pub fn edge_cost(&self, x: &Pose, m: &MotionPrimitive) -> Result<f64> {
        let mut err = None;
        let c = self.edge_cost_with(x, m, |p| match self.point_cost(p) {
            Ok(c) => c,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(c),
        }
    }

    /// Cost integral evaluated with clamped lookups; never fails.
    pub fn edge_cost_clamped(&self, x: &Pose, m: &MotionPrimitive) -> f64 {
        self.edge_cost_with(x, m, |p| self.point_cost_clamped(p))
    }

    fn edge_cost_with(&self, x: &Pose, m: &MotionPrimitive, mut c: impl FnMut(&Vec3) -> f64) -> f64 {
        if m.delta_ell <= 0.0 {
            return 0.0;
        }
        let n = (m.delta_ell / self.quadrature_step()).ceil().max(1.0) as usize;
        let h = m.delta_ell / n as f64;
        let arc = Arc::new(x, m);
        let mut sum = 0.5 * (c(&arc.point(0.0)) + c(&arc.point(m.delta_ell)));
        for i in 1..n {
            sum += c(&arc.point(i as f64 * h));
        }
        sum * h
    }

    /// Cost integral along a trajectory; additive over its primitives.
    pub fn trajectory_cost(&self, t: &Trajectory) -> Result<f64> {
        let mut x = t.start;
        let mut total = 0.0;
        for m in &t.primitives {
            total += self.edge_cost(&x, m)?;
            x = crate::kinematics::apply_primitive(&x, m);
        }
        Ok(total)
    }

    /// SHA-256 over the canonical binary form of the environment.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(MAGIC.as_bytes());
        for d in self.dims {
            h.update((d as u64).to_le_bytes());
        }
        for v in [
            self.spacing,
            self.origin.x,
            self.origin.y,
            self.origin.z,
            self.needle_radius,
            self.c_min,
            self.c_max,
        ] {
            h.update(v.to_le_bytes());
        }
        h.update(self.occupancy.iter().map(|&o| o as u8).collect::<Vec<_>>());
        for c in &self.cost {
            h.update(c.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

fn inflate(occupancy: &[bool], dims: [usize; 3], radius_vox: f64) -> Vec<bool> {
    if !occupancy.iter().any(|&o| o) {
        return occupancy.to_vec();
    }
    let d2 = edt::squared_edt(occupancy, dims);
    let r2 = radius_vox * radius_vox + 1e-9;
    d2.iter()
        .zip(occupancy)
        .map(|(&d, &o)| o || d <= r2)
        .collect()
}

/// Closed-form point evaluator for a single primitive.
#[derive(Debug, Clone, Copy)]
pub struct Arc {
    origin: Vec3,
    frame: crate::kinematics::Quat,
    kappa: f64,
}

impl Arc {
    pub fn new(x: &Pose, m: &MotionPrimitive) -> Self {
        Self {
            origin: x.p,
            frame: x.q * crate::kinematics::Quat::from_axis_angle(&Vec3::z_axis(), m.delta_theta),
            kappa: m.kappa,
        }
    }

    pub fn point(&self, s: f64) -> Vec3 {
        if self.kappa == 0.0 {
            return self.origin + self.frame * Vec3::new(0.0, 0.0, s);
        }
        let half = 0.5 * self.kappa * s;
        let local = Vec3::new(
            2.0 * half.sin() * half.sin() / self.kappa,
            0.0,
            (2.0 * half).sin() / self.kappa,
        );
        self.origin + self.frame * local
    }
}

/// Slab test of segment `ab` against the closed box `[lo, hi]`.
fn segment_meets_box(a: &Vec3, b: &Vec3, lo: &Vec3, hi: &Vec3) -> bool {
    let d = b - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for k in 0..3 {
        if d[k].abs() < 1e-15 {
            if a[k] < lo[k] || a[k] > hi[k] {
                return false;
            }
            continue;
        }
        let (mut u, mut v) = ((lo[k] - a[k]) / d[k], (hi[k] - a[k]) / d[k]);
        if u > v {
            std::mem::swap(&mut u, &mut v);
        }
        t0 = t0.max(u);
        t1 = t1.min(v);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Positions along `m` from `x` at spacing `h`, endpoint included.
pub fn arc_positions(x: &Pose, m: &MotionPrimitive, h: f64) -> impl Iterator<Item = Vec3> {
    let arc = Arc::new(x, m);
    let len = m.delta_ell;
    let n = if len > 0.0 { (len / h).ceil().max(1.0) as usize } else { 0 };
    let step = if n > 0 { len / n as f64 } else { 0.0 };
    (0..=n).map(move |i| arc.point(i as f64 * step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::apply_primitive;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_with(dims: [usize; 3], f: impl Fn(usize, usize, usize) -> (bool, f32), radius: f64) -> Environment {
        let mut occ = Vec::new();
        let mut cost = Vec::new();
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let (o, c) = f(i, j, k);
                    occ.push(o);
                    cost.push(c);
                }
            }
        }
        Environment::new(Vec3::zeros(), 1.0, dims, occ, cost, radius, 0.01, 10.0).unwrap()
    }

    #[test]
    fn uniform_cost_everywhere() {
        let env = Environment::uniform(Vec3::zeros(), 1.0, [5, 5, 5], 1.0);
        assert_eq!(env.point_cost(&Vec3::new(1.3, 2.7, 0.1)).unwrap(), 1.0);
    }

    #[test]
    fn interpolation_at_centers_and_midpoints() {
        let env = grid_with([4, 3, 3], |i, _, _| (false, if i == 1 { 1.0 } else { 3.0 }), 0.0);
        assert_eq!(env.point_cost(&Vec3::new(1.0, 1.0, 1.0)).unwrap(), 1.0);
        assert_abs_diff_eq!(env.point_cost(&Vec3::new(1.5, 1.0, 1.0)).unwrap(), 2.0, epsilon = 1e-12);
        assert!(env.point_cost(&Vec3::new(10.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn occupied_voxel_is_not_free() {
        let env = grid_with([9, 9, 9], |i, j, k| ((i, j, k) == (4, 4, 4), 1.0), 0.0);
        assert!(!env.is_free(&Vec3::new(4.0, 4.0, 4.0)));
        assert!(env.is_free(&Vec3::new(1.0, 1.0, 1.0)));
        assert!(!env.is_free(&Vec3::new(-3.0, 1.0, 1.0)));
    }

    #[test]
    fn inflation_matches_brute_force_distance() {
        let r = 2.5;
        let env = grid_with([15, 15, 15], |i, j, k| ((i, j, k) == (7, 7, 7), 1.0), r);
        let obstacle = Vec3::new(7.0, 7.0, 7.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let p = Vec3::new(rng.gen_range(0.0..14.0), rng.gen_range(0.0..14.0), rng.gen_range(0.0..14.0));
            let v = env.voxel_of(&p).unwrap();
            let center = env.voxel_center(v[0], v[1], v[2]);
            let expected_blocked = (center - obstacle).norm() <= r + 1e-9;
            assert_eq!(env.is_free(&p), !expected_blocked);
        }
        // a point at distance r - spacing from the obstacle is inside the dilation
        let dir = Vec3::new(0.3, -0.5, 0.81).normalize();
        assert!(!env.is_free(&(obstacle + dir * (r - 1.0))));
        assert!(env.inflated().iter().zip(env.occupancy()).all(|(&i, &o)| i || !o));
    }

    #[test]
    fn edge_checks() {
        let empty = Environment::uniform(Vec3::zeros(), 1.0, [20, 20, 40], 1.0);
        let x = Pose::at(Vec3::new(10.0, 10.0, 2.0));
        let m = MotionPrimitive::new(0.05, 20.0, 0.0);
        assert!(empty.edge_collision_free(&x, &m, 0.05));

        let mid = crate::kinematics::Trajectory::new(x, vec![m]).pose_at(10.0).p;
        let blocked = grid_with([20, 20, 40], |i, j, k| {
            let c = Vec3::new(i as f64, j as f64, k as f64);
            ((c - mid).norm() < 0.9, 1.0)
        }, 0.0);
        assert!(!blocked.edge_collision_free(&x, &m, 0.05));
    }

    #[test]
    fn grazing_plane_obstacle_respects_needle_radius() {
        // straight insertion along z at x = 5; wall of voxels at x >= 8
        let radius = 2.5;
        let env = grid_with([16, 12, 30], |i, _, _| (i >= 8, 1.0), radius);
        let m = MotionPrimitive::straight(20.0);
        let clear = Pose::at(Vec3::new(5.0, 6.0, 3.0)); // clearance 3 > radius
        assert!(env.edge_collision_free(&clear, &m, 0.05));
        let close = Pose::at(Vec3::new(6.0, 6.0, 3.0)); // clearance 2 < radius
        assert!(!env.edge_collision_free(&close, &m, 0.05));
    }

    #[test]
    fn cost_integrals() {
        let env = Environment::uniform(Vec3::zeros(), 1.0, [30, 30, 60], 1.0);
        let t = Trajectory::new(
            Pose::at(Vec3::new(15.0, 15.0, 5.0)),
            vec![MotionPrimitive::new(0.03, 17.3, 0.4), MotionPrimitive::straight(9.1)],
        );
        let c = env.trajectory_cost(&t).unwrap();
        assert_abs_diff_eq!(c, t.length(), epsilon = 1e-9 * t.length());
        assert_eq!(env.trajectory_cost(&Trajectory::empty(t.start)).unwrap(), 0.0);

        // linear ramp c(z) = c0 + g z, voxel center z = k
        let (c0, g) = (0.5, 0.1);
        let ramp = grid_with([5, 5, 40], |_, _, k| (false, (c0 + g * k as f64) as f32), 0.0);
        let len = 30.0;
        let t = Trajectory::new(Pose::at(Vec3::new(2.0, 2.0, 0.0)), vec![MotionPrimitive::straight(len)]);
        let exact = c0 * len + g * len * len / 2.0;
        let got = ramp.trajectory_cost(&t).unwrap();
        assert!(((got - exact) / exact).abs() < 1e-6, "{got} vs {exact}");

        // additivity over concatenation
        let a = Trajectory::new(Pose::at(Vec3::new(2.0, 2.0, 0.0)), vec![MotionPrimitive::straight(12.0)]);
        let b = Trajectory::new(a.end(), vec![MotionPrimitive::new(0.02, 10.0, 1.0)]);
        let ab = a.concat(&b.primitives);
        let sum = ramp.trajectory_cost(&a).unwrap() + ramp.trajectory_cost(&b).unwrap();
        assert_abs_diff_eq!(ramp.trajectory_cost(&ab).unwrap(), sum, epsilon = 1e-9);
    }

    #[test]
    fn arc_evaluator_agrees_with_apply() {
        let x = Pose::new(Vec3::new(1.0, 2.0, 3.0), crate::kinematics::Quat::from_euler_angles(0.4, 0.1, -0.7));
        let m = MotionPrimitive::new(0.04, 13.0, 2.2);
        let end = apply_primitive(&x, &m);
        assert_abs_diff_eq!(Arc::new(&x, &m).point(13.0), end.p, epsilon = 1e-12);
    }
}
