//! Duty-cycling and strict-approximation checks.

use serde::{Deserialize, Serialize};

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::kinematics::{apply_primitive, pose_distance, MotionPrimitive, Pose, Trajectory};

/// Outcome of a strict-approximation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    /// Largest sampled distance from conditions (ii) and (iii).
    pub beta_measured: f64,
    /// `ℓ'/ℓ`, worst piece for piecewise checks.
    pub length_ratio: f64,
    /// Length-cost ratio of the whole trajectories.
    pub cost_ratio: f64,
    pub passed: bool,
}

const SNAP: f64 = 1e-9;

/// Fast pose lookup along a trajectory by arc length.
struct Sampler {
    starts: Vec<f64>,
    poses: Vec<Pose>,
    prims: Vec<MotionPrimitive>,
    length: f64,
}

impl Sampler {
    fn new(t: &Trajectory) -> Self {
        let mut starts = Vec::with_capacity(t.primitives.len());
        let mut s = 0.0;
        for m in &t.primitives {
            starts.push(s);
            s += m.delta_ell;
        }
        Self {
            starts,
            poses: t.waypoints(),
            prims: t.primitives.clone(),
            length: s,
        }
    }

    fn at(&self, s: f64) -> Pose {
        if self.prims.is_empty() || s <= 0.0 {
            return self.poses[0];
        }
        if s >= self.length {
            return *self.poses.last().expect("waypoints are never empty");
        }
        // partitions are sums of the same lengths in another order, so
        // boundaries are matched with a small tolerance
        let i = self.starts.partition_point(|&a| a <= s + SNAP) - 1;
        apply_primitive(&self.poses[i], &self.prims[i].truncated((s - self.starts[i]).max(0.0)))
    }

    /// Left limit at `s`: at a primitive boundary this is the end of the
    /// earlier primitive, before the next roll.
    fn at_left(&self, s: f64) -> Pose {
        if self.prims.is_empty() || s <= 0.0 {
            return self.poses[0];
        }
        if s >= self.length {
            return *self.poses.last().expect("waypoints are never empty");
        }
        let i = self.starts.partition_point(|&a| a < s - SNAP).max(1) - 1;
        let ds = (s - self.starts[i]).min(self.prims[i].delta_ell);
        apply_primitive(&self.poses[i], &self.prims[i].truncated(ds))
    }

    /// Pose inside a piece starting at `lo`: right limit at the piece start,
    /// left limit everywhere else.
    fn in_piece(&self, lo: f64, u: f64) -> Pose {
        if u <= 0.0 {
            self.at(lo)
        } else {
            self.at_left(lo + u)
        }
    }
}

/// Largest sampled deviation between `σ(a + u)` and `σ'(b + u)` for the
/// piece pair `[a, a + l]`, `[b, b + l']`.
fn piece_deviation(sa: &Sampler, a: f64, l: f64, sb: &Sampler, b: f64, lp: f64, alpha: f64, h: f64) -> f64 {
    let shared = l.min(lp);
    let mut worst: f64 = 0.0;
    let n = (shared / h).ceil() as u64;
    for k in 0..=n {
        let u = (k as f64 * h).min(shared);
        worst = worst.max(pose_distance(&sa.in_piece(a, u), &sb.in_piece(b, u), alpha));
    }
    if lp > shared {
        let end = sa.in_piece(a, l);
        let n = ((lp - shared) / h).ceil() as u64;
        for k in 0..=n {
            let u = (shared + k as f64 * h).min(lp);
            worst = worst.max(pose_distance(&end, &sb.in_piece(b, u), alpha));
        }
    }
    worst
}

fn sampling_step(beta: f64) -> f64 {
    (beta / 10.0).min(0.05)
}

fn check_pieces(
    sigma: &Trajectory,
    sigma_prime: &Trajectory,
    partition: &[f64],
    partition_prime: &[f64],
    beta: f64,
    alpha: f64,
) -> ApproxReport {
    let sa = Sampler::new(sigma);
    let sb = Sampler::new(sigma_prime);
    let h = sampling_step(beta);
    let mut beta_measured: f64 = 0.0;
    let mut length_ratio: f64 = 0.0;
    let mut ok = true;
    for i in 0..partition.len() - 1 {
        let (a, b) = (partition[i], partition_prime[i]);
        let l = partition[i + 1] - a;
        let lp = partition_prime[i + 1] - b;
        // a second pass at half the step guards against missed peaks
        let d = piece_deviation(&sa, a, l, &sb, b, lp, alpha, h)
            .max(piece_deviation(&sa, a, l, &sb, b, lp, alpha, h / 2.0));
        beta_measured = beta_measured.max(d);
        let ratio = if l > 0.0 { lp / l } else if lp > 0.0 { f64::INFINITY } else { 1.0 };
        length_ratio = length_ratio.max(ratio);
        ok &= lp <= (1.0 + beta) * l + 1e-12 && d <= beta;
    }
    let (l, lp) = (sigma.length(), sigma_prime.length());
    ApproxReport {
        beta_measured,
        length_ratio,
        cost_ratio: if l > 0.0 { lp / l } else { 1.0 },
        passed: ok,
    }
}

/// Checks that `σ'` is a local strict β-approximation of `σ`: length ratio
/// at most `1 + β`, pointwise distance at most `β` on the shared domain,
/// and the tail of `σ'` within `β` of the end of `σ`.
pub fn verify_local_strict(sigma: &Trajectory, sigma_prime: &Trajectory, beta: f64, alpha: f64) -> ApproxReport {
    check_pieces(
        sigma,
        sigma_prime,
        &[0.0, sigma.length()],
        &[0.0, sigma_prime.length()],
        beta,
        alpha,
    )
}

/// Piecewise check with explicit arc-length partitions of both trajectories.
pub fn verify_piecewise(
    sigma: &Trajectory,
    sigma_prime: &Trajectory,
    partition: &[f64],
    partition_prime: &[f64],
    beta: f64,
    alpha: f64,
) -> Result<ApproxReport> {
    if partition.len() != partition_prime.len() || partition.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "partitions have {} and {} points",
            partition.len(),
            partition_prime.len()
        )));
    }
    let ends_ok = |p: &[f64], l: f64| {
        p[0] == 0.0 && (p[p.len() - 1] - l).abs() <= 1e-9 * l.max(1.0) && p.windows(2).all(|w| w[0] <= w[1])
    };
    if !ends_ok(partition, sigma.length()) || !ends_ok(partition_prime, sigma_prime.length()) {
        return Err(Error::InvalidArgument(
            "partitions must be non-decreasing from 0 to the trajectory length".into(),
        ));
    }
    Ok(check_pieces(sigma, sigma_prime, partition, partition_prime, beta, alpha))
}

/// Straight `t`, max-curvature arc of angle `η`, straight `t` with
/// `t = (r − 1/κ_max)·tan(η/2)`. Ends at the same pose as an arc of radius
/// `r` and angle `η` in the local x-z plane.
pub fn duty_cycle_segment(r: f64, eta: f64, kappa_max: f64) -> Result<[MotionPrimitive; 3]> {
    let r_min = 1.0 / kappa_max;
    if !(kappa_max > 0.0) || !(r >= r_min * (1.0 - 1e-12)) {
        return Err(Error::InvalidArgument(format!(
            "radius {r} is tighter than the minimum radius {r_min}"
        )));
    }
    if !(eta > 0.0 && eta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidArgument(format!("eta {eta} outside (0, π/2)")));
    }
    let t = ((r - r_min) * (eta / 2.0).tan()).max(0.0);
    Ok([
        MotionPrimitive::new(0.0, t, 0.0),
        MotionPrimitive::new(kappa_max, eta / kappa_max, 0.0),
        MotionPrimitive::new(0.0, t, 0.0),
    ])
}

/// Duty-cycled trajectory with the arc-length partitions that pair each
/// input primitive with the primitives that replace it.
#[derive(Debug, Clone)]
pub struct DutyCycled {
    pub trajectory: Trajectory,
    pub partition: Vec<f64>,
    pub partition_prime: Vec<f64>,
}

fn is_native(kappa: f64, kappa_max: f64) -> bool {
    kappa == 0.0 || (kappa - kappa_max).abs() <= 1e-12 * kappa_max
}

/// Sub-arc angle satisfying both the deviation and the length rule.
fn initial_eta(r: f64, beta_d: f64, ell: f64, total: f64) -> f64 {
    let mut eta = total.min(1.0);
    for _ in 0..200 {
        let dev = r * (1.0 / (eta / 2.0).cos() - 1.0);
        let len = 2.0 * (eta / 2.0).tan() / eta;
        if dev <= beta_d && len <= 1.0 + beta_d / ell {
            break;
        }
        eta /= 2.0;
    }
    eta
}

fn expand(m: &MotionPrimitive, n: u64, kappa_max: f64) -> Result<Vec<MotionPrimitive>> {
    let r = 1.0 / m.kappa;
    let eta = m.kappa * m.delta_ell / n as f64;
    let [_, arc, straight] = duty_cycle_segment(r, eta, kappa_max)?;
    let t = straight.delta_ell;
    let mut out = Vec::with_capacity(2 * n as usize + 1);
    out.push(MotionPrimitive::new(0.0, t, m.delta_theta));
    for k in 0..n {
        out.push(arc);
        let len = if k + 1 == n { t } else { 2.0 * t };
        out.push(MotionPrimitive::new(0.0, len, 0.0));
    }
    Ok(out)
}

/// Replaces every primitive of intermediate curvature by duty-cycled
/// straight and max-curvature pieces. The input primitive's roll goes on
/// the first replacement; sub-arcs are halved until each piece is a local
/// strict `β_d`-approximation of the primitive it replaces.
pub fn duty_cycle_partitioned(sigma: &Trajectory, beta_d: f64, kappa_max: f64, alpha: f64) -> Result<DutyCycled> {
    if !(beta_d > 0.0) {
        return Err(Error::InvalidArgument("beta_d must be positive".into()));
    }
    let mut prims = Vec::new();
    let mut partition = vec![0.0];
    let mut partition_prime = vec![0.0];
    let mut x = sigma.start;
    for m in &sigma.primitives {
        if !(m.kappa >= 0.0 && m.kappa <= kappa_max * (1.0 + 1e-12) && m.delta_ell > 0.0) {
            return Err(Error::InvalidArgument(format!("primitive out of range: {m:?}")));
        }
        let piece = if is_native(m.kappa, kappa_max) {
            vec![*m]
        } else {
            let total = m.kappa * m.delta_ell;
            let eta = initial_eta(1.0 / m.kappa, beta_d, m.delta_ell, total);
            let mut n = (total / eta).ceil().max(1.0) as u64;
            let original = Trajectory::new(x, vec![*m]);
            let mut attempts = 0;
            loop {
                let cand = expand(m, n, kappa_max)?;
                let report = verify_local_strict(&original, &Trajectory::new(x, cand.clone()), beta_d, alpha);
                if report.passed {
                    break cand;
                }
                attempts += 1;
                if attempts > 30 {
                    return Err(Error::InvalidArgument(format!(
                        "no duty-cycled approximation of {m:?} within {beta_d}"
                    )));
                }
                n *= 2;
            }
        };
        partition.push(partition.last().unwrap() + m.delta_ell);
        partition_prime.push(partition_prime.last().unwrap() + piece.iter().map(|p| p.delta_ell).sum::<f64>());
        prims.extend(piece);
        x = apply_primitive(&x, m);
    }
    Ok(DutyCycled {
        trajectory: Trajectory::new(sigma.start, prims),
        partition,
        partition_prime,
    })
}

/// Duty-cycled approximation of `sigma` using only curvatures `0` and `κ_max`.
pub fn duty_cycle_approximate(sigma: &Trajectory, beta_d: f64, kappa_max: f64, alpha: f64) -> Result<Trajectory> {
    duty_cycle_partitioned(sigma, beta_d, kappa_max, alpha).map(|d| d.trajectory)
}

/// Inputs of the similar-cost inequality and its outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBoundReport {
    pub cost: f64,
    pub cost_prime: f64,
    pub k: f64,
    /// `(1 + k·β)·C(σ)`.
    pub bound: f64,
    pub holds: bool,
}

/// Well-behaved cost field parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostConstants {
    pub l_c: f64,
    pub c_min: f64,
    pub c_max: f64,
}

/// Checks `C(σ') ≤ (1 + k·β)·C(σ)` with `k = (L_c + c_max)/c_min` using the
/// environment's cost field. `partitions` selects the piecewise variant of
/// the precondition; `None` requires a local strict approximation.
pub fn cost_bound_check(
    sigma: &Trajectory,
    sigma_prime: &Trajectory,
    partitions: Option<(&[f64], &[f64])>,
    beta: f64,
    alpha: f64,
    constants: CostConstants,
    env: &Environment,
) -> Result<CostBoundReport> {
    let pre = match partitions {
        Some((a, b)) => verify_piecewise(sigma, sigma_prime, a, b, beta, alpha)?,
        None => verify_local_strict(sigma, sigma_prime, beta, alpha),
    };
    if !pre.passed {
        return Err(Error::InvalidArgument(format!(
            "not a strict {beta}-approximation (measured {}, length ratio {})",
            pre.beta_measured, pre.length_ratio
        )));
    }
    if !(constants.c_min > 0.0 && constants.c_max >= constants.c_min && constants.l_c >= 0.0) {
        return Err(Error::InvalidArgument("need 0 < c_min ≤ c_max and L_c ≥ 0".into()));
    }
    let cost = env.trajectory_cost(sigma)?;
    let cost_prime = env.trajectory_cost(sigma_prime)?;
    let k = (constants.l_c + constants.c_max) / constants.c_min;
    let bound = (1.0 + k * beta) * cost;
    Ok(CostBoundReport {
        cost,
        cost_prime,
        k,
        bound,
        holds: cost_prime <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Vec3;

    const KMAX: f64 = 0.02;

    fn arc_end(r: f64, eta: f64) -> Pose {
        Trajectory::new(Pose::identity(), vec![MotionPrimitive::new(1.0 / r, r * eta, 0.0)]).end()
    }

    #[test]
    fn boundary_radius_is_pure_arc() {
        let s = duty_cycle_segment(1.0 / KMAX, 0.3, KMAX).unwrap();
        assert_eq!(s[0].delta_ell, 0.0);
        assert_eq!(s[2].delta_ell, 0.0);
        assert!(duty_cycle_segment(0.9 / KMAX, 0.3, KMAX).is_err());
        assert!(duty_cycle_segment(2.0 / KMAX, 1.6, KMAX).is_err());
    }

    #[test]
    fn segment_endpoint_matches_arc() {
        let r = 2.0 / KMAX;
        let s = duty_cycle_segment(r, 0.2, KMAX).unwrap();
        assert!((s[0].delta_ell - (0.1f64).tan() / KMAX).abs() < 1e-12);
        let end = Trajectory::new(Pose::identity(), s.to_vec()).end();
        let want = arc_end(r, 0.2);
        assert!((end.p - want.p).norm() < 1e-9);
        assert!((end.tangent() - want.tangent()).norm() < 1e-9);
    }

    #[test]
    fn identical_trajectories_pass() {
        let t = Trajectory::new(Pose::identity(), vec![MotionPrimitive::new(0.01, 20.0, 0.4)]);
        let r = verify_local_strict(&t, &t, 0.01, 1.0);
        assert!(r.passed);
        assert!(r.beta_measured < 1e-12);
    }

    #[test]
    fn translated_trajectory_fails() {
        let t = Trajectory::new(Pose::identity(), vec![MotionPrimitive::new(0.01, 20.0, 0.4)]);
        let moved = Trajectory::new(Pose::at(Vec3::new(0.2, 0.0, 0.0)), t.primitives.clone());
        let r = verify_local_strict(&t, &moved, 0.1, 1.0);
        assert!(!r.passed);
        assert!((r.beta_measured - 0.2).abs() < 1e-9);
        // failure does not depend on which side is perturbed
        assert!(!verify_local_strict(&moved, &t, 0.1, 1.0).passed);
    }

    #[test]
    fn partition_mismatch_is_an_error() {
        let t = Trajectory::new(Pose::identity(), vec![MotionPrimitive::straight(5.0)]);
        assert!(verify_piecewise(&t, &t, &[0.0, 5.0], &[0.0, 2.0, 5.0], 0.1, 1.0).is_err());
        assert!(verify_piecewise(&t, &t, &[0.0, 2.0, 5.0], &[0.0, 2.0, 5.0], 0.1, 1.0).unwrap().passed);
    }

    #[test]
    fn one_shifted_piece_fails() {
        let a = Trajectory::new(Pose::identity(), vec![MotionPrimitive::straight(5.0), MotionPrimitive::straight(5.0)]);
        let b = Trajectory::new(Pose::identity(), vec![MotionPrimitive::straight(5.0), MotionPrimitive::new(0.0, 5.0, 0.0)]);
        let c = Trajectory::new(Pose::identity(), vec![MotionPrimitive::straight(5.0), MotionPrimitive::straight(5.5)]);
        assert!(verify_piecewise(&a, &b, &[0.0, 5.0, 10.0], &[0.0, 5.0, 10.0], 0.1, 1.0).unwrap().passed);
        assert!(!verify_piecewise(&a, &c, &[0.0, 5.0, 10.0], &[0.0, 5.0, 10.5], 0.1, 1.0).unwrap().passed);
    }

    #[test]
    fn native_curvatures_unchanged() {
        let t = Trajectory::new(
            Pose::identity(),
            vec![MotionPrimitive::new(KMAX, 10.0, 1.0), MotionPrimitive::straight(3.0)],
        );
        assert_eq!(duty_cycle_approximate(&t, 0.5, KMAX, 1.0).unwrap(), t);
    }

    #[test]
    fn half_curvature_arc_passes() {
        let t = Trajectory::new(Pose::identity(), vec![MotionPrimitive::new(KMAX / 2.0, 20.0, 0.7)]);
        let d = duty_cycle_partitioned(&t, 0.5, KMAX, 1.0).unwrap();
        assert!(d.trajectory.primitives.iter().all(|m| m.kappa == 0.0 || m.kappa == KMAX));
        let r = verify_piecewise(&t, &d.trajectory, &d.partition, &d.partition_prime, 0.5, 1.0).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(d.trajectory.length() / t.length() <= 1.0 + 0.5 / 20.0 + 1e-9);
        let (a, b) = (t.end(), d.trajectory.end());
        assert!((a.p - b.p).norm() < 1e-9);
        assert!((a.tangent() - b.tangent()).norm() < 1e-9);
    }
}
