use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{resolve_config, run_planner, PlannerKind, PlannerOverrides};
use crate::environment::{generate_scenario, ScenarioSpec};
use crate::error::{Error, Result};
use crate::search::{PlanResult, TracePoint};

pub const CSV_HEADER: &str = "scenario_id,planner,t_first_ms,c_first,t_best_ms,c_best,nodes_expanded";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Scenario template; its seed is replaced per scenario.
    pub template: ScenarioSpec,
    pub scenarios: usize,
    pub base_seed: u64,
    pub planners: Vec<PlannerKind>,
    pub overrides: PlannerOverrides,
    /// Scenarios processed concurrently.
    pub workers: usize,
    /// Samples of the relative-cost curves.
    pub curve_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario_id: String,
    pub planner: PlannerKind,
    pub t_first_ms: Option<f64>,
    pub c_first: Option<f64>,
    pub t_best_ms: Option<f64>,
    pub c_best: Option<f64>,
    pub nodes_expanded: u64,
}

impl BenchRow {
    fn from_result(id: &str, planner: PlannerKind, r: &PlanResult) -> Self {
        let first = r.first();
        let last = r.last();
        Self {
            scenario_id: id.to_string(),
            planner,
            t_first_ms: first.map(|p| p.time_ms),
            c_first: first.map(|p| p.cost),
            t_best_ms: last.map(|p| p.time_ms),
            c_best: last.map(|p| p.cost),
            nodes_expanded: r.nodes_expanded,
        }
    }

    fn csv_line(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.scenario_id,
            self.planner,
            f(self.t_first_ms),
            f(self.c_first),
            f(self.t_best_ms),
            f(self.c_best),
            self.nodes_expanded
        )
    }
}

/// Per-scenario traces of every planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRuns {
    pub scenario_id: String,
    pub seed: u64,
    pub traces: Vec<(PlannerKind, Vec<TracePoint>)>,
}

/// Mean cost relative to each scenario's first-found plan over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCurve {
    pub planner: PlannerKind,
    pub time_ms: Vec<f64>,
    /// `None` where no scenario had a plan yet.
    pub mean_relative_cost: Vec<Option<f64>>,
    pub solved: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub ratio: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchAggregate {
    pub scenarios: usize,
    pub budget_ms: f64,
    pub curves: Vec<CostCurve>,
    /// Final RCS cost over final ROS cost, on scenarios both solved.
    pub rcs_over_ros_cdf: Vec<CdfPoint>,
    /// Omitted under the virtual clock so outputs stay reproducible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRun {
    pub rows: Vec<BenchRow>,
    pub runs: Vec<ScenarioRuns>,
    pub aggregate: BenchAggregate,
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchRun> {
    if cfg.planners.is_empty() || cfg.workers == 0 {
        return Err(Error::InvalidArgument("need at least one planner and one worker".into()));
    }
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let per_scenario: Vec<Result<(Vec<BenchRow>, ScenarioRuns)>> = pool.install(|| {
        (0..cfg.scenarios)
            .into_par_iter()
            .map(|i| {
                let seed = cfg.base_seed + i as u64;
                let spec = ScenarioSpec {
                    seed,
                    ..cfg.template.clone()
                };
                let (_, problem) = generate_scenario(&spec)?;
                let id = format!("s{seed}");
                let mut rows = Vec::new();
                let mut traces = Vec::new();
                let overrides = PlannerOverrides {
                    seed: Some(cfg.overrides.seed.unwrap_or(seed)),
                    ..cfg.overrides.clone()
                };
                for &kind in &cfg.planners {
                    let config = resolve_config(&problem, kind, &overrides)?;
                    let r = run_planner(&problem, &config)?;
                    log::info!("{id} {kind}: cost {:?} after {} nodes", r.best_cost, r.nodes_expanded);
                    rows.push(BenchRow::from_result(&id, kind, &r));
                    traces.push((kind, r.trace));
                }
                Ok((
                    rows,
                    ScenarioRuns {
                        scenario_id: id,
                        seed,
                        traces,
                    },
                ))
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for r in per_scenario {
        let (r, s) = r?;
        rows.extend(r);
        runs.push(s);
    }
    let budget = cfg.overrides.budget_ms.unwrap_or(10_000.0);
    let mut agg = aggregate(&runs, &cfg.planners, budget, cfg.curve_points.max(2));
    if cfg.overrides.virtual_clock.is_none() {
        agg.wall_clock_ms = Some(started.elapsed().as_secs_f64() * 1e3);
    }
    Ok(BenchRun {
        rows,
        runs,
        aggregate: agg,
    })
}

/// Cost of the earliest plan any planner found; ties go to the planner
/// listed first.
fn reference_cost(run: &ScenarioRuns) -> Option<f64> {
    let mut best: Option<TracePoint> = None;
    for (_, t) in &run.traces {
        if let Some(p) = t.first() {
            if best.map_or(true, |b| p.time_ms < b.time_ms) {
                best = Some(*p);
            }
        }
    }
    best.map(|p| p.cost)
}

fn cost_at(trace: &[TracePoint], t: f64) -> Option<f64> {
    trace.iter().take_while(|p| p.time_ms <= t).last().map(|p| p.cost)
}

pub fn aggregate(runs: &[ScenarioRuns], planners: &[PlannerKind], budget_ms: f64, points: usize) -> BenchAggregate {
    let times: Vec<f64> = (0..points)
        .map(|k| budget_ms * k as f64 / (points - 1) as f64)
        .collect();
    let curves = planners
        .iter()
        .map(|&kind| {
            let mut mean = Vec::with_capacity(points);
            let mut solved = Vec::with_capacity(points);
            for &t in &times {
                let mut sum = 0.0;
                let mut n = 0;
                for run in runs {
                    let Some(reference) = reference_cost(run) else { continue };
                    let trace = run.traces.iter().find(|(k, _)| *k == kind).map(|(_, t)| t.as_slice());
                    if let Some(c) = trace.and_then(|tr| cost_at(tr, t)) {
                        sum += if reference > 0.0 { c / reference } else { 1.0 };
                        n += 1;
                    }
                }
                mean.push((n > 0).then(|| sum / n as f64));
                solved.push(n);
            }
            CostCurve {
                planner: kind,
                time_ms: times.clone(),
                mean_relative_cost: mean,
                solved,
            }
        })
        .collect();
    let final_cost = |run: &ScenarioRuns, kind: PlannerKind| {
        run.traces
            .iter()
            .find(|(k, _)| *k == kind)
            .and_then(|(_, t)| t.last().map(|p| p.cost))
    };
    let mut ratios: Vec<f64> = runs
        .iter()
        .filter_map(|r| match (final_cost(r, PlannerKind::Rcs), final_cost(r, PlannerKind::Ros)) {
            (Some(a), Some(b)) if b > 0.0 => Some(a / b),
            _ => None,
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len();
    let rcs_over_ros_cdf = ratios
        .into_iter()
        .enumerate()
        .map(|(i, ratio)| CdfPoint {
            ratio,
            fraction: (i + 1) as f64 / n as f64,
        })
        .collect();
    BenchAggregate {
        scenarios: runs.len(),
        budget_ms,
        curves,
        rcs_over_ros_cdf,
        wall_clock_ms: None,
    }
}

pub fn write_csv(rows: &[BenchRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}
