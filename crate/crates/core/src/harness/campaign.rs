use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::environment::Environment;
use crate::error::Result;
use crate::kinematics::{MotionPrimitive, Pose, Quat, Trajectory, Vec3};
use crate::search::{dsim_from_theory, successor_gap};
use crate::theory::{
    action_distance, cost_bound_check, duty_cycle_partitioned, duty_cycle_segment, estimate_lipschitz,
    replay_pruning_chain, verify_piecewise, CostConstants, LipschitzEstimate, LipschitzSetup,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub seed: u64,
    pub kappa_max: f64,
    pub delta_ell_max: f64,
    pub alpha: f64,
    pub approx_cases: usize,
    pub cost_cases: usize,
    pub lipschitz_samples: u64,
    pub chains: usize,
    pub d_sim: f64,
    pub metric_cases: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            kappa_max: 0.02,
            delta_ell_max: 20.0,
            alpha: 1.0,
            approx_cases: 200,
            cost_cases: 200,
            lipschitz_samples: 10_000,
            chains: 100,
            d_sim: 0.01,
            metric_cases: 200,
        }
    }
}

/// Outcome of one randomized or grid check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    /// Smallest slack `bound − measured` over all cases.
    pub worst_margin: f64,
    /// First violating case, if any.
    pub offending: Option<Value>,
}

impl CampaignResult {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            cases: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            offending: None,
        }
    }

    /// Records one case; `margin < 0` or `!ok` counts as a violation.
    fn record(&mut self, margin: f64, ok: bool, case: impl FnOnce() -> Value) {
        self.cases += 1;
        self.worst_margin = self.worst_margin.min(margin);
        if !ok || margin < 0.0 {
            self.violations += 1;
            if self.offending.is_none() {
                self.offending = Some(case());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub config: CampaignConfig,
    pub lipschitz: LipschitzEstimate,
    pub campaigns: Vec<CampaignResult>,
    pub all_passed: bool,
}

/// Radius-to-minimum-radius ratios and sub-arc angles of the duty-cycling grid.
pub const DUTY_RADII: [f64; 5] = [1.01, 1.5, 2.0, 5.0, 20.0];
pub const DUTY_ANGLES: [f64; 5] = [0.05, 0.1, 0.2, 0.35, 0.5];

/// Measurements of one duty-cycled segment against its target arc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DutyGridCase {
    pub r: f64,
    pub eta: f64,
    pub endpoint_error: f64,
    pub deviation: f64,
    pub deviation_bound: f64,
    pub length_ratio: f64,
    pub length_bound: f64,
}

/// Distance from a point in the local x-z plane to the arc of radius `r`
/// and angle `eta` that starts at the origin heading along +z.
fn distance_to_arc(w: &Vec3, r: f64, eta: f64) -> f64 {
    let (u, v) = (w.x - r, w.z);
    let phi = v.atan2(-u);
    let off_plane = w.y.abs();
    if (0.0..=eta).contains(&phi) {
        (u.hypot(v) - r).hypot(off_plane)
    } else {
        let a = Vec3::zeros();
        let b = Vec3::new(r * (1.0 - eta.cos()), 0.0, r * eta.sin());
        (w - a).norm().min((w - b).norm())
    }
}

pub fn duty_grid_case(r: f64, eta: f64, kappa_max: f64) -> Result<DutyGridCase> {
    let seg = duty_cycle_segment(r, eta, kappa_max)?;
    let prims: Vec<MotionPrimitive> = seg.iter().copied().filter(|m| m.delta_ell > 0.0).collect();
    let duty = Trajectory::new(Pose::identity(), prims);
    let target = Trajectory::new(Pose::identity(), vec![MotionPrimitive::new(1.0 / r, r * eta, 0.0)]);
    let (a, b) = (duty.end(), target.end());
    let endpoint_error = (a.p - b.p).norm().max((a.tangent() - b.tangent()).norm());
    let step = (r * eta / 4000.0).min(0.01);
    let deviation = duty
        .sample(step)
        .iter()
        .map(|(_, x)| distance_to_arc(&x.p, r, eta))
        .fold(0.0, f64::max);
    Ok(DutyGridCase {
        r,
        eta,
        endpoint_error,
        deviation,
        deviation_bound: r * (1.0 / (eta / 2.0).cos() - 1.0),
        length_ratio: duty.length() / (r * eta),
        length_bound: 2.0 * (eta / 2.0).tan() / eta,
    })
}

fn duty_grid(kappa_max: f64) -> Result<CampaignResult> {
    let mut c = CampaignResult::new("duty_cycle_grid");
    for &ratio in &DUTY_RADII {
        for &eta in &DUTY_ANGLES {
            let d = duty_grid_case(ratio / kappa_max, eta, kappa_max)?;
            let margin = (d.deviation_bound + 1e-6 - d.deviation)
                .min(d.length_bound + 1e-6 - d.length_ratio)
                .min(1e-9 - d.endpoint_error);
            c.record(margin, true, || json!(d));
        }
    }
    Ok(c)
}

/// Random non-native primitive sequences for approximation checks.
pub fn random_trajectory(rng: &mut ChaCha8Rng, start: Pose, kappa_max: f64, pieces: usize) -> Trajectory {
    let prims = (0..pieces)
        .map(|_| {
            MotionPrimitive::new(
                rng.gen_range(0.05..0.95) * kappa_max,
                rng.gen_range(5.0..20.0),
                rng.gen_range(0.0..TAU),
            )
        })
        .collect();
    Trajectory::new(start, prims)
}

fn duty_approx(cfg: &CampaignConfig, rng: &mut ChaCha8Rng) -> Result<CampaignResult> {
    let mut c = CampaignResult::new("duty_cycle_approximate");
    for _ in 0..cfg.approx_cases {
        let pieces = rng.gen_range(1..=3);
        let sigma = random_trajectory(rng, Pose::identity(), cfg.kappa_max, pieces);
        let beta = rng.gen_range(0.2..1.0);
        let d = duty_cycle_partitioned(&sigma, beta, cfg.kappa_max, cfg.alpha)?;
        let rep = verify_piecewise(&sigma, &d.trajectory, &d.partition, &d.partition_prime, beta, cfg.alpha)?;
        let mut margin = beta - rep.beta_measured;
        for (i, m) in sigma.primitives.iter().enumerate() {
            let lp = d.partition_prime[i + 1] - d.partition_prime[i];
            margin = margin.min(1.0 + beta / m.delta_ell + 1e-9 - lp / m.delta_ell);
        }
        let native = d.trajectory.primitives.iter().all(|m| m.kappa == 0.0 || m.kappa == cfg.kappa_max);
        c.record(margin, rep.passed && native, || json!({ "sigma": sigma.primitives, "beta": beta }));
    }
    Ok(c)
}

/// Smooth cost field: Gaussian blobs over a base level, clamped into
/// `[c_min, c_max]`.
pub fn smooth_cost_env(rng: &mut ChaCha8Rng, dims: usize, spacing: f64, c_min: f64, c_max: f64) -> Result<Environment> {
    let half = dims as f64 * spacing / 2.0;
    let origin = Vec3::repeat(-half + spacing / 2.0);
    let blobs: Vec<(Vec3, f64, f64)> = (0..10)
        .map(|_| {
            let p = Vec3::new(rng.gen_range(-half..half), rng.gen_range(-half..half), rng.gen_range(-half..half));
            (p, rng.gen_range(-0.6..0.8), rng.gen_range(6.0..14.0))
        })
        .collect();
    let n = dims * dims * dims;
    let mut cost = Vec::with_capacity(n);
    for k in 0..dims {
        for j in 0..dims {
            for i in 0..dims {
                let p = origin + Vec3::new(i as f64, j as f64, k as f64) * spacing;
                let mut v = 0.4;
                for (c, a, s) in &blobs {
                    v += a * (-(p - c).norm_squared() / (2.0 * s * s)).exp();
                }
                cost.push((c_min + (c_max - c_min) * v.clamp(0.0, 1.0)) as f32);
            }
        }
    }
    Environment::new(origin, spacing, [dims; 3], vec![false; n], cost, 0.0, c_min, c_max)
}

fn random_orientation(rng: &mut ChaCha8Rng) -> Quat {
    Quat::from_euler_angles(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI))
}

fn cost_bound(cfg: &CampaignConfig, rng: &mut ChaCha8Rng) -> Result<CampaignResult> {
    let mut c = CampaignResult::new("cost_bound");
    let per_env = 50;
    let mut env: Option<Arc<Environment>> = None;
    for i in 0..cfg.cost_cases {
        if i % per_env == 0 {
            env = Some(Arc::new(smooth_cost_env(rng, 48, 2.0, 0.2, 1.0)?));
        }
        let env = env.as_ref().expect("created on the first case");
        let start = Pose::new(Vec3::zeros(), random_orientation(rng));
        let pieces = rng.gen_range(1..=2);
        let sigma = random_trajectory(rng, start, cfg.kappa_max, pieces);
        let beta = rng.gen_range(0.1..1.0);
        let d = duty_cycle_partitioned(&sigma, beta, cfg.kappa_max, cfg.alpha)?;
        let constants = CostConstants {
            l_c: env.cost_lipschitz(),
            c_min: env.c_min(),
            c_max: env.c_max(),
        };
        let case = || json!({ "sigma": sigma.primitives, "start": sigma.start, "beta": beta });
        match cost_bound_check(
            &sigma,
            &d.trajectory,
            Some((&d.partition, &d.partition_prime)),
            beta,
            cfg.alpha,
            constants,
            env,
        ) {
            Ok(rep) => c.record(rep.bound - rep.cost_prime, rep.holds, || json!({ "case": case(), "report": rep })),
            Err(e) => c.record(f64::NEG_INFINITY, false, || json!({ "case": case(), "error": e.to_string() })),
        }
    }
    Ok(c)
}

fn metric_bound(cfg: &CampaignConfig, rng: &mut ChaCha8Rng) -> CampaignResult {
    let mut c = CampaignResult::new("action_distance_bound");
    for _ in 0..cfg.metric_cases {
        let k = rng.gen_range(0.0..=cfg.kappa_max);
        let (l1, l2) = (rng.gen_range(0.5..cfg.delta_ell_max), rng.gen_range(0.5..cfg.delta_ell_max));
        let t1 = rng.gen_range(0.0..TAU);
        let t2 = (t1 + rng.gen_range(-0.5..0.5)).rem_euclid(TAU);
        let (m1, m2) = (MotionPrimitive::new(k, l1, t1), MotionPrimitive::new(k, l2, t2));
        let dt = {
            let d = (t1 - t2).abs();
            d.min(TAU - d)
        };
        let dl = (l1 - l2).abs();
        let bound = dt * l1.min(l2) + dl + cfg.alpha * (dt + dl * k);
        let d = action_distance(&m1, &m2, cfg.alpha);
        c.record(bound + 1e-9 - d, true, || json!({ "m1": m1, "m2": m2, "distance": d, "bound": bound }));
    }
    c
}

fn pruning(cfg: &CampaignConfig, l_s: f64, rng: &mut ChaCha8Rng) -> Result<CampaignResult> {
    let mut c = CampaignResult::new("pruning_replay");
    let setup = LipschitzSetup::new(cfg.kappa_max, cfg.delta_ell_max, cfg.alpha);
    for _ in 0..cfg.chains {
        let n = rng.gen_range(1..=8);
        let seed = rng.gen();
        let r = replay_pruning_chain(n, cfg.d_sim, l_s, &setup, seed)?;
        // one replacement has drift exactly equal to the bound
        c.record(r.bound * (1.0 + 1e-9) - r.drift, true, || json!({ "n": n, "seed": seed, "replay": r }));
    }
    Ok(c)
}

fn dsim_numbers() -> Result<CampaignResult> {
    let mut c = CampaignResult::new("dsim_first_term");
    let first = successor_gap(1.0 / 50.0, 0.125);
    let want = 100.0 * 0.00125f64.sin();
    let d = dsim_from_theory(1.0 / 50.0, 0.125, 100.0, 1.5, 0.1)?;
    c.record(1e-12 - (first - want).abs(), d <= first, || json!({ "first": first, "want": want }));
    Ok(c)
}

/// Runs every theory check. Campaigns draw from one seeded stream in a
/// fixed order, so the report is reproducible.
pub fn run_campaigns(cfg: &CampaignConfig) -> Result<TheoryReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let setup = LipschitzSetup::new(cfg.kappa_max, cfg.delta_ell_max, cfg.alpha);
    let lipschitz = estimate_lipschitz(cfg.lipschitz_samples, cfg.seed, &setup)?;
    let mut lip = CampaignResult::new("lipschitz_at_least_one");
    lip.record(lipschitz.raw - 1.0, true, || json!(lipschitz));
    let campaigns = vec![
        duty_grid(cfg.kappa_max)?,
        duty_approx(cfg, &mut rng)?,
        cost_bound(cfg, &mut rng)?,
        metric_bound(cfg, &mut rng),
        lip,
        pruning(cfg, lipschitz.value, &mut rng)?,
        dsim_numbers()?,
    ];
    let all_passed = campaigns.iter().all(CampaignResult::passed);
    Ok(TheoryReport {
        config: cfg.clone(),
        lipschitz,
        campaigns,
        all_passed,
    })
}
