//! Planner selection, result reports, benchmarks and theory campaigns
//! shared by the command-line tool.

mod bench;
mod campaign;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Resolution;
use crate::problem::PlanningProblem;
use crate::rrt::{rrt_plan, RrtConfig};
use crate::search::{plan, PlanResult, PlannerConfig};

pub use bench::{aggregate, run_bench, write_csv, BenchAggregate, BenchConfig, BenchRow, BenchRun, CdfPoint, CostCurve, CSV_HEADER};
pub use campaign::{run_campaigns, CampaignConfig, CampaignResult, TheoryReport};
pub use report::{plan_report, PlanReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Ros,
    Rcs,
    Rrt,
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlannerKind::Ros => "ros",
            PlannerKind::Rcs => "rcs",
            PlannerKind::Rrt => "rrt",
        })
    }
}

impl FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ros" => Ok(PlannerKind::Ros),
            "rcs" => Ok(PlannerKind::Rcs),
            "rrt" => Ok(PlannerKind::Rrt),
            other => Err(Error::InvalidArgument(format!("unknown planner '{other}'"))),
        }
    }
}

/// Optional settings layered over the per-problem planner defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlannerOverrides {
    pub budget_ms: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub n_la: Option<u32>,
    pub d_sim: Option<f64>,
    pub alpha: Option<f64>,
    pub eps: Option<f64>,
    pub dl_min: Option<f64>,
    pub dtheta_min: Option<f64>,
    pub dl_max: Option<f64>,
    pub virtual_clock: Option<f64>,
    pub inevitable_check: Option<bool>,
}

/// Fully resolved configuration of one planner run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "planner", rename_all = "lowercase")]
pub enum RunConfig {
    Ros(PlannerConfig),
    Rcs(PlannerConfig),
    Rrt(RrtConfig),
}

impl RunConfig {
    pub fn kind(&self) -> PlannerKind {
        match self {
            RunConfig::Ros(_) => PlannerKind::Ros,
            RunConfig::Rcs(_) => PlannerKind::Rcs,
            RunConfig::Rrt(_) => PlannerKind::Rrt,
        }
    }
}

/// Applies overrides to the defaults for `problem`. When `dl_min` changes
/// and `d_sim` is not given, `d_sim` is recomputed from the new cutoff.
pub fn resolve_config(problem: &PlanningProblem, kind: PlannerKind, o: &PlannerOverrides) -> Result<RunConfig> {
    if kind == PlannerKind::Rrt {
        let mut c = RrtConfig::default();
        if let Some(b) = o.budget_ms {
            c.time_budget_ms = b;
        }
        if let Some(s) = o.seed {
            c.seed = s;
        }
        if let Some(l) = o.dl_max {
            c.step_ell = l;
        }
        c.virtual_clock = o.virtual_clock;
        c.check()?;
        return Ok(RunConfig::Rrt(c));
    }
    let mut c = match kind {
        PlannerKind::Ros => PlannerConfig::ros(problem),
        _ => PlannerConfig::rcs(problem),
    };
    if let Some(b) = o.budget_ms {
        c.time_budget_ms = Some(b);
    }
    if let Some(s) = o.seed {
        c.seed = s;
    }
    if let Some(t) = o.threads {
        c.threads = t;
    }
    if let Some(n) = o.n_la {
        if kind == PlannerKind::Rcs && n != 0 {
            log::warn!("rcs ignores n_la = {n}");
        } else {
            c.n_la = n;
        }
    }
    if let Some(a) = o.alpha {
        c.alpha = a;
    }
    if let Some(e) = o.eps {
        c.eps = e;
    }
    if let Some(l) = o.dl_max {
        c.delta_ell_max = l;
    }
    c.r_min = Resolution::new(
        o.dl_min.unwrap_or(c.r_min.delta_ell_min),
        o.dtheta_min.unwrap_or(c.r_min.delta_theta_min),
    );
    c.d_sim = match o.d_sim {
        Some(d) => d,
        None => {
            let d = crate::search::default_d_sim(problem.kappa_max, c.r_min.delta_ell_min, problem.tau);
            log::info!("d_sim defaults to {d} (heuristic: min of successor gap and tau/4)");
            d
        }
    };
    if let Some(i) = o.inevitable_check {
        c.inevitable_check = i;
    }
    c.virtual_clock = o.virtual_clock;
    c.check()?;
    Ok(match kind {
        PlannerKind::Ros => RunConfig::Ros(c),
        _ => RunConfig::Rcs(c),
    })
}

pub fn run_planner(problem: &PlanningProblem, config: &RunConfig) -> Result<PlanResult> {
    match config {
        RunConfig::Ros(c) | RunConfig::Rcs(c) => plan(problem, c),
        RunConfig::Rrt(c) => rrt_plan(problem, c),
    }
}
