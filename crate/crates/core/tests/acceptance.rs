//! Acceptance checks. Every test writes one PASS/FAIL line straight to
//! stdout, so the verdicts show up even when test output is captured.

use std::f64::consts::{FRAC_PI_8, PI, TAU};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use needlesteer::environment::scenario::ScenarioMode;
use needlesteer::guidance::heuristic;
use needlesteer::harness::{run_bench, BenchConfig, PlannerKind, PlannerOverrides};
use needlesteer::kinematics::Quat;
use needlesteer::lattice::Resolution;
use needlesteer::nalgebra::Matrix3;
use needlesteer::search::{default_d_sim, dsim_from_theory, successor_gap, Termination};
use needlesteer::theory::{
    brute_force_optimal, cost_bound_check, duty_cycle_partitioned, duty_cycle_segment, estimate_lipschitz,
    replay_pruning_chain, CostConstants, LipschitzSetup, DEFAULT_NODE_CAP,
};
use needlesteer::{
    apply_primitive, generate_scenario, plan, Environment, Error, MotionPrimitive, PlannerConfig, PlanningProblem, Pose,
    ScenarioSpec, Trajectory, Vec3,
};

/// Suboptimality factor used throughout the evaluation.
const EPS: f64 = 0.1;
/// Processed nodes per virtual millisecond, calibrated so that a virtual
/// budget matches wall time on the standard preset in a release build.
const CALIBRATED_RATE: f64 = 25.0;

fn verdict(id: u32, name: &str, ok: bool, detail: &str) {
    let line = format!("{} criterion {id:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
    assert!(ok, "{line}");
}

// Exhaustively searchable scenarios: `ℓ_max = 4·δℓ_min`, so no lattice plan
// has more than four edges.
const ORACLE_DL_MAX: f64 = 28.0;

fn oracle_resolution() -> Resolution {
    Resolution::new(ORACLE_DL_MAX / 4.0, FRAC_PI_8)
}

fn oracle_spec(seed: u64) -> ScenarioSpec {
    let mut s = ScenarioSpec::small(seed);
    s.ell_max = ORACLE_DL_MAX;
    s.tau = 1.5;
    s
}

fn coarse_ros(p: &PlanningProblem) -> PlannerConfig {
    let r = oracle_resolution();
    let mut c = PlannerConfig::ros(p);
    c.r_min = r;
    c.delta_ell_max = ORACLE_DL_MAX;
    c.d_sim = default_d_sim(p.kappa_max, r.delta_ell_min, p.tau);
    c.eps = EPS;
    c.time_budget_ms = Some(60_000.0);
    c
}

fn oracle(p: &PlanningProblem) -> Option<f64> {
    brute_force_optimal(p, &oracle_resolution(), ORACLE_DL_MAX, DEFAULT_NODE_CAP)
        .expect("oracle instance within the node cap")
        .map(|(_, c)| c)
}

#[test]
fn criterion_01_oracle_optimality() {
    let t0 = Instant::now();
    let (mut solved, mut violations, mut worst) = (0, 0, 0.0f64);
    let mut seed = 0;
    while solved < 20 && seed < 200 {
        let generated = generate_scenario(&oracle_spec(seed));
        seed += 1;
        let Ok((_, p)) = generated else { continue };
        let Some(best) = oracle(&p) else { continue };
        solved += 1;
        let r = plan(&p, &coarse_ros(&p)).unwrap();
        let ratio = r.best_cost.map_or(f64::INFINITY, |c| c / best);
        worst = worst.max(ratio);
        if ratio > 1.0 + EPS {
            violations += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        1,
        "oracle epsilon-optimality",
        solved >= 20 && violations == 0 && secs < 120.0,
        &format!("{solved} scenarios ({seed} drawn), worst ROS/oracle {worst:.4} <= {}, {violations} violations, {secs:.1}s < 120s", 1.0 + EPS),
    );
}

#[test]
fn criterion_02_ros_vs_rcs() {
    let t0 = Instant::now();
    let cfg = BenchConfig {
        template: ScenarioSpec::standard(0),
        scenarios: 30,
        base_seed: 0,
        planners: vec![PlannerKind::Ros, PlannerKind::Rcs],
        overrides: PlannerOverrides {
            budget_ms: Some(10_000.0),
            threads: Some(1),
            virtual_clock: Some(CALIBRATED_RATE),
            ..PlannerOverrides::default()
        },
        workers: 1,
        curve_points: 11,
    };
    let run = run_bench(&cfg).unwrap();
    let cost = |id: &str, kind: PlannerKind| {
        run.rows
            .iter()
            .find(|r| r.scenario_id == id && r.planner == kind)
            .and_then(|r| r.c_best)
            .unwrap_or(f64::INFINITY)
    };
    let mut ros = Vec::new();
    let mut rcs = Vec::new();
    let mut wins = 0;
    for id in run.rows.iter().filter(|r| r.planner == PlannerKind::Ros).map(|r| r.scenario_id.clone()) {
        let (a, b) = (cost(&id, PlannerKind::Ros), cost(&id, PlannerKind::Rcs));
        if a <= 1.001 * b {
            wins += 1;
        }
        ros.push(a);
        rcs.push(b);
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    };
    let n = ros.len();
    let (mr, mc) = (median(&mut ros), median(&mut rcs));
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        2,
        "ROS vs RCS final cost",
        n == 30 && wins * 5 >= n * 4 && mr <= mc && secs < 900.0,
        &format!("ROS <= 1.001 RCS in {wins}/{n} (need 80%), median ROS {mr:.4} vs RCS {mc:.4}, {secs:.0}s < 900s"),
    );
}

#[test]
fn criterion_03_completeness_signaling() {
    let mut sealed_ok = 0;
    let mut slowest = 0.0f64;
    for seed in 0..10 {
        let mut spec = ScenarioSpec::small(seed);
        spec.mode = ScenarioMode::Sealed;
        let (_, p) = generate_scenario(&spec).unwrap();
        let mut all = true;
        // with and without the flood fill, so the search itself must run dry
        for flood in [true, false] {
            let mut c = PlannerConfig::ros(&p);
            c.r_min = Resolution::new(c.delta_ell_max / 4.0, FRAC_PI_8);
            c.d_sim = default_d_sim(p.kappa_max, c.r_min.delta_ell_min, p.tau);
            c.time_budget_ms = Some(60_000.0);
            c.inevitable_check = flood;
            let t = Instant::now();
            let r = plan(&p, &c).unwrap();
            let secs = t.elapsed().as_secs_f64();
            slowest = slowest.max(secs);
            all &= r.best.is_none() && r.terminated == Termination::OpenExhausted && secs < 60.0;
        }
        sealed_ok += all as usize;
    }
    let mut trivial_ok = 0;
    for seed in 0..10 {
        let mut spec = ScenarioSpec::small(seed);
        spec.mode = ScenarioMode::Trivial;
        let (_, p) = generate_scenario(&spec).unwrap();
        let mut c = PlannerConfig::ros(&p);
        c.time_budget_ms = Some(1_000.0);
        c.virtual_clock = Some(CALIBRATED_RATE);
        let r = plan(&p, &c).unwrap();
        trivial_ok += r.best.as_ref().is_some_and(|t| p.validate_plan(t).is_ok()) as usize;
    }
    verdict(
        3,
        "completeness signaling",
        sealed_ok == 10 && trivial_ok == 10,
        &format!("sealed open-exhausted {sealed_ok}/10 (slowest {slowest:.2}s < 60s), trivial planned {trivial_ok}/10"),
    );
}

/// Distance from `w` to the arc of radius `r` and angle `eta` that leaves
/// the origin along +z and bends toward +x.
fn arc_distance(w: &Vec3, r: f64, eta: f64) -> f64 {
    let phi = w.z.atan2(r - w.x);
    if (0.0..=eta).contains(&phi) {
        ((w.x - r).hypot(w.z) - r).hypot(w.y)
    } else {
        let end = Vec3::new(r * (1.0 - eta.cos()), 0.0, r * eta.sin());
        w.norm().min((w - end).norm())
    }
}

#[test]
fn criterion_04_duty_cycling_bounds() {
    let t0 = Instant::now();
    let kappa = 1.0 / 50.0;
    let mut violations = 0;
    let mut worst_dev = f64::NEG_INFINITY;
    let mut worst_len = f64::NEG_INFINITY;
    for ratio in [1.01, 1.5, 2.0, 5.0, 20.0] {
        for eta in [0.05, 0.1, 0.2, 0.35, 0.5] {
            let r = ratio / kappa;
            let seg = duty_cycle_segment(r, eta, kappa).unwrap();
            let duty = Trajectory::new(Pose::identity(), seg.to_vec());
            let dev = duty
                .sample(r * eta / 20_000.0)
                .iter()
                .map(|(_, x)| arc_distance(&x.p, r, eta))
                .fold(0.0, f64::max);
            let dev_bound = r * (1.0 / (eta / 2.0).cos() - 1.0);
            let len_ratio = duty.length() / (r * eta);
            let len_bound = 2.0 * (eta / 2.0).tan() / eta;
            worst_dev = worst_dev.max(dev - dev_bound);
            worst_len = worst_len.max(len_ratio - len_bound);
            if dev > dev_bound + 1e-6 || len_ratio > len_bound + 1e-6 {
                violations += 1;
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        4,
        "duty-cycling bounds",
        violations == 0 && secs < 10.0,
        &format!("25 grid cells, {violations} violations, max excess deviation {worst_dev:.2e}, length ratio {worst_len:.2e} (tol 1e-6), {secs:.2}s < 10s"),
    );
}

fn skew(w: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// RK4 on `p' = R e_z`, `R' = R [κ e_y]×`: the tip moves along its local z
/// axis and bends toward local +x.
fn rk4(start: &Pose, m: &MotionPrimitive, steps: usize) -> (Vec3, Matrix3<f64>) {
    let roll = Quat::from_axis_angle(&Vec3::z_axis(), m.delta_theta);
    let mut p = start.p;
    let mut rot = (start.q * roll).to_rotation_matrix().into_inner();
    let omega = skew(&Vec3::new(0.0, m.kappa, 0.0));
    let h = m.delta_ell / steps as f64;
    let f = |r: &Matrix3<f64>| (r.column(2).into_owned(), r * omega);
    for _ in 0..steps {
        let (k1p, k1r) = f(&rot);
        let (k2p, k2r) = f(&(rot + k1r * (h / 2.0)));
        let (k3p, k3r) = f(&(rot + k2r * (h / 2.0)));
        let (k4p, k4r) = f(&(rot + k3r * h));
        p += (k1p + 2.0 * k2p + 2.0 * k3p + k4p) * (h / 6.0);
        rot += (k1r + 2.0 * k2r + 2.0 * k3r + k4r) * (h / 6.0);
    }
    (p, rot)
}

#[test]
fn criterion_05_kinematics_oracle() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_p, mut worst_r) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let start = Pose::new(
            Vec3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)),
            Quat::from_euler_angles(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)),
        );
        let kappa_max = 1.0 / 50.0;
        let kappa = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..=kappa_max) };
        let m = MotionPrimitive::new(kappa, rng.gen_range(0.01..=20.0), rng.gen_range(0.0..TAU));
        let (p, rot) = rk4(&start, &m, 400);
        let x = apply_primitive(&start, &m);
        worst_p = worst_p.max((x.p - p).norm());
        // sine of the relative rotation angle, well conditioned near zero
        let rel = x.q.to_rotation_matrix().into_inner().transpose() * rot;
        let a = rel - rel.transpose();
        worst_r = worst_r.max(0.5 * Vec3::new(a[(2, 1)], a[(0, 2)], a[(1, 0)]).norm());
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        5,
        "kinematics vs RK4",
        worst_p <= 1e-6 && worst_r <= 1e-8 && secs < 10.0,
        &format!("1000 primitives, max position error {worst_p:.2e} mm <= 1e-6, max rotation error {worst_r:.2e} rad <= 1e-8, {secs:.2}s < 10s"),
    );
}

#[test]
fn criterion_06_heuristic_admissibility() {
    let mut checked = 0;
    let mut finite = 0;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut seed = 0;
    while checked < 1000 && seed < 400 {
        let generated = generate_scenario(&oracle_spec(seed));
        seed += 1;
        let Ok((_, p)) = generated else { continue };
        let mut c = coarse_ros(&p);
        c.record_nodes = true;
        let r = plan(&p, &c).unwrap();
        let log = &r.expanded_log;
        let take = 50.min(log.len()).min(1000 - checked);
        for i in 0..take {
            let v = &log[i * log.len() / take];
            let h = heuristic(&v.pose, &p.p_goal, p.tau, p.kappa_max, p.c_min());
            assert!((h - v.h).abs() <= 1e-9 * (1.0 + h), "stored heuristic differs");
            checked += 1;
            let sub = p.from_pose(v.pose, p.ell_max - v.length);
            if let Some(best) = oracle(&sub) {
                finite += 1;
                worst = worst.max(h - best);
                if h > best + 1e-9 {
                    violations += 1;
                }
            }
        }
    }
    verdict(
        6,
        "heuristic admissibility",
        checked == 1000 && violations == 0,
        &format!("{checked} nodes over {seed} scenarios, {finite} with a lattice plan, {violations} violations, max h - optimal {worst:.3}"),
    );
}

#[test]
fn criterion_07_conservative_pruning() {
    let mut checked = 0;
    let mut violations = 0;
    let mut with_pruning = 0;
    let mut generated = 0;
    for seed in 0..100 {
        let Ok((_, p)) = generate_scenario(&oracle_spec(1000 + seed)) else { continue };
        generated += 1;
        let mut c = coarse_ros(&p);
        c.record_nodes = true;
        let r = plan(&p, &c).unwrap();
        let log = &r.pruned_log;
        if log.is_empty() {
            continue;
        }
        with_pruning += 1;
        let take = 20.min(log.len());
        for i in 0..take {
            let v = &log[i * log.len() / take];
            checked += 1;
            // a pose outside the workspace or inside an obstacle has no plan
            let sub = p.from_pose(v.pose, p.ell_max - v.length);
            match brute_force_optimal(&sub, &oracle_resolution(), ORACLE_DL_MAX, DEFAULT_NODE_CAP) {
                Ok(None) | Err(Error::InvalidStart(_)) => {}
                Ok(Some(_)) => violations += 1,
                Err(e) => panic!("oracle failed: {e}"),
            }
        }
    }
    verdict(
        7,
        "conservative pruning",
        generated >= 90 && checked > 0 && violations == 0,
        &format!("{generated} of 100 seeds generated ({with_pruning} with reach pruning), {checked} pruned nodes replayed, {violations} admit a lattice plan"),
    );
}

/// Gaussian blobs over a base level: smooth, hence Lipschitz, and clamped
/// into `[c_min, c_max]`.
fn blob_cost_env(rng: &mut ChaCha8Rng) -> Environment {
    let (n, h) = (40usize, 2.0);
    let origin = Vec3::repeat(-(n as f64) * h / 2.0);
    let blobs: Vec<(Vec3, f64, f64)> = (0..8)
        .map(|_| {
            let c = Vec3::new(rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0));
            (c, rng.gen_range(-0.5..0.8), rng.gen_range(5.0..12.0))
        })
        .collect();
    let (c_min, c_max) = (0.2, 1.0);
    let mut cost = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let w = origin + Vec3::new(i as f64, j as f64, k as f64) * h;
                let v: f64 = 0.4 + blobs.iter().map(|(c, a, s)| a * (-(w - c).norm_squared() / (2.0 * s * s)).exp()).sum::<f64>();
                cost.push((c_min + (c_max - c_min) * v.clamp(0.0, 1.0)) as f32);
            }
        }
    }
    Environment::new(origin, h, [n; 3], vec![false; n * n * n], cost, 0.0, c_min, c_max).unwrap()
}

#[test]
fn criterion_08_similar_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let kappa = 1.0 / 50.0;
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let mut env = blob_cost_env(&mut rng);
    for case in 0..1000 {
        if case % 100 == 99 {
            env = blob_cost_env(&mut rng);
        }
        let start = Pose::new(
            Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
            Quat::from_euler_angles(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)),
        );
        let prims = (0..rng.gen_range(1..=2))
            .map(|_| MotionPrimitive::new(rng.gen_range(0.05..0.95) * kappa, rng.gen_range(5.0..15.0), rng.gen_range(0.0..TAU)))
            .collect();
        let sigma = Trajectory::new(start, prims);
        let beta = rng.gen_range(0.1..1.0);
        let d = duty_cycle_partitioned(&sigma, beta, kappa, 1.0).unwrap();
        let constants = CostConstants {
            l_c: env.cost_lipschitz(),
            c_min: env.c_min(),
            c_max: env.c_max(),
        };
        match cost_bound_check(&sigma, &d.trajectory, Some((&d.partition, &d.partition_prime)), beta, 1.0, constants, &env) {
            Ok(rep) if rep.holds => worst = worst.min(rep.bound - rep.cost_prime),
            _ => violations += 1,
        }
    }
    verdict(
        8,
        "similar-cost lemma",
        violations == 0,
        &format!("1000 duty-cycled pairs over 10 cost fields, {violations} violations, smallest slack {worst:.3e}"),
    );
}

/// Roundoff allowance on the replay: a single replacement has drift exactly
/// `ξ = d_sim`.
const REPLAY_RTOL: f64 = 1e-9;

#[test]
fn criterion_09_dsim_numerics() {
    let kappa = 1.0 / 50.0;
    let want = 100.0 * 0.00125f64.sin();
    let first = successor_gap(kappa, 0.125);
    // L_s barely above one makes the second term large, leaving the first
    let via_theory = dsim_from_theory(kappa, 0.125, 100.0, 1.0 + 1e-9, 1e6).unwrap();
    let term_err = (first - want).abs().max((via_theory - want).abs());

    let setup = LipschitzSetup::new(kappa, 20.0, 1.0);
    let l_s = estimate_lipschitz(10_000, 9, &setup).unwrap().value;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=8);
        let r = replay_pruning_chain(n, 0.01, l_s, &setup, rng.gen()).unwrap();
        worst = worst.max(r.drift / r.bound);
        if r.drift > r.bound * (1.0 + REPLAY_RTOL) {
            violations += 1;
        }
    }
    verdict(
        9,
        "d_sim bound numerics",
        term_err <= 1e-12 && violations == 0,
        &format!("first term error {term_err:.1e} <= 1e-12, 100 chains with L_s {l_s:.3}, {violations} drift > xi (rtol {REPLAY_RTOL:.0e}), max drift/xi {worst:.3}"),
    );
}

fn cli(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_needlesteer"))
        .args(args)
        .env_remove("NEEDLESTEER_LOG")
        .output()
        .unwrap();
    assert!(out.status.code().is_some_and(|c| c <= 3), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn session(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let d = |f: &str| dir.join(f).to_str().unwrap().to_owned();
    cli(&["gen-env", "--preset", "small", "--seed", "7", "--out", &d("scenario")]);
    for planner in ["ros", "rcs", "rrt"] {
        cli(&[
            "plan", "--env", &d("scenario/env.json"), "--problem", &d("scenario/problem.json"), "--planner", planner,
            "--budget-ms", "500", "--virtual-clock", "40", "--threads", "1", "--out", &d(&format!("{planner}.json")),
        ]);
    }
    cli(&[
        "bench", "--preset", "small", "--scenarios", "3", "--base-seed", "20", "--budget-ms", "300",
        "--virtual-clock", "40", "--threads", "1", "--curve-points", "11", "--out", &d("bench"),
    ]);
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for e in fs::read_dir(&p).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn criterion_10_determinism() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (fa, fb) = (session(a.path()), session(b.path()));
    let differing: Vec<&str> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    verdict(
        10,
        "determinism",
        fa.len() == fb.len() && fa.len() == 11 && differing.is_empty(),
        &format!("{} files from gen-env, plan x3 and bench, {} differ {:?}", fa.len(), differing.len(), differing),
    );
}
