use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use needlesteer::environment::scenario::ScenarioMode;
use needlesteer::harness::{
    plan_report, resolve_config, run_bench, run_campaigns, run_planner, write_csv, BenchConfig, CampaignConfig,
    PlannerKind, PlannerOverrides,
};
use needlesteer::search::Termination;
use needlesteer::{generate_scenario, load_env, save_env, Error, PlanningProblem, ProblemSpec, ScenarioSpec};

const EXIT_NO_PLAN: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;
const EXIT_BAD_INPUT: u8 = 1;
const EXIT_THEORY_VIOLATION: u8 = 4;

#[derive(Parser)]
#[command(name = "needlesteer", version, about = "Steerable needle motion planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic environment and planning query.
    GenEnv(GenEnvArgs),
    /// Plan for one environment and query.
    Plan(PlanArgs),
    /// Run several planners over generated scenarios.
    Bench(BenchArgs),
    /// Run the numerical theory checks.
    ValidateTheory(TheoryArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Small,
    Standard,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Standard,
    Sealed,
    Trivial,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerArg {
    Ros,
    Rcs,
    Rrt,
}

impl From<PlannerArg> for PlannerKind {
    fn from(p: PlannerArg) -> Self {
        match p {
            PlannerArg::Ros => PlannerKind::Ros,
            PlannerArg::Rcs => PlannerKind::Rcs,
            PlannerArg::Rrt => PlannerKind::Rrt,
        }
    }
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario spec JSON; overrides the preset.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "standard")]
    preset: Preset,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

impl ScenarioArgs {
    fn template(&self, seed: u64) -> Result<ScenarioSpec, Error> {
        let mut spec = match &self.spec {
            Some(p) => serde_json::from_str(&read(p)?)?,
            None => match self.preset {
                Preset::Small => ScenarioSpec::small(seed),
                Preset::Standard => ScenarioSpec::standard(seed),
            },
        };
        spec.seed = seed;
        if let Some(m) = self.mode {
            spec.mode = match m {
                ModeArg::Standard => ScenarioMode::Standard,
                ModeArg::Sealed => ScenarioMode::Sealed,
                ModeArg::Trivial => ScenarioMode::Trivial,
            };
        }
        Ok(spec)
    }
}

#[derive(Args)]
struct GenEnvArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for env.json, its blobs, problem.json and scenario.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Default)]
struct PlannerFlags {
    #[arg(long)]
    budget_ms: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    n_la: Option<u32>,
    #[arg(long)]
    d_sim: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    dl_min: Option<f64>,
    #[arg(long)]
    dtheta_min: Option<f64>,
    #[arg(long)]
    dl_max: Option<f64>,
    /// Processed nodes per virtual millisecond; replaces wall time.
    #[arg(long)]
    virtual_clock: Option<f64>,
    /// Disable the inevitable-collision flood fill.
    #[arg(long)]
    no_inevitable: bool,
}

impl PlannerFlags {
    fn overrides(&self) -> PlannerOverrides {
        PlannerOverrides {
            budget_ms: self.budget_ms,
            seed: self.seed,
            threads: self.threads,
            n_la: self.n_la,
            d_sim: self.d_sim,
            alpha: self.alpha,
            eps: self.eps,
            dl_min: self.dl_min,
            dtheta_min: self.dtheta_min,
            dl_max: self.dl_max,
            virtual_clock: self.virtual_clock,
            inevitable_check: self.no_inevitable.then_some(false),
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    /// Environment manifest.
    #[arg(long)]
    env: PathBuf,
    /// Problem JSON.
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, value_enum, default_value = "ros")]
    planner: PlannerArg,
    #[command(flatten)]
    flags: PlannerFlags,
    /// Result JSON path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 30)]
    scenarios: usize,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    /// Comma-separated planner list.
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["ros", "rcs", "rrt"])]
    planners: Vec<PlannerArg>,
    /// Scenarios run concurrently.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 101)]
    curve_points: usize,
    #[command(flatten)]
    flags: PlannerFlags,
    /// Output directory for bench.csv and aggregate.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    approx_cases: usize,
    #[arg(long, default_value_t = 200)]
    cost_cases: usize,
    #[arg(long, default_value_t = 10_000)]
    lipschitz_samples: u64,
    #[arg(long, default_value_t = 100)]
    chains: usize,
    #[arg(long, default_value_t = 0.01)]
    d_sim: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Report JSON path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(p: &Path) -> Result<String, Error> {
    fs::read_to_string(p).map_err(|e| Error::io(p, e))
}

fn write(p: &Path, data: &[u8]) -> Result<(), Error> {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(p, data).map_err(|e| Error::io(p, e))
}

fn emit(out: Option<&Path>, json: &str) -> Result<(), Error> {
    match out {
        Some(p) => write(p, format!("{json}\n").as_bytes()),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn gen_env(a: &GenEnvArgs) -> Result<u8, Error> {
    let spec = a.scenario.template(a.seed)?;
    let (env, problem) = generate_scenario(&spec)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    save_env(&env, a.out.join("env.json"))?;
    write(&a.out.join("problem.json"), serde_json::to_string_pretty(&problem.spec())?.as_bytes())?;
    write(&a.out.join("scenario.json"), serde_json::to_string_pretty(&spec)?.as_bytes())?;
    log::info!("wrote scenario {} to {}", problem.digest(), a.out.display());
    Ok(0)
}

fn plan_cmd(a: &PlanArgs) -> Result<u8, Error> {
    let env = Arc::new(load_env(&a.env)?);
    let spec: ProblemSpec = serde_json::from_str(&read(&a.problem)?)?;
    let problem = PlanningProblem::from_spec(env, &spec);
    let config = resolve_config(&problem, a.planner.into(), &a.flags.overrides())?;
    let result = run_planner(&problem, &config)?;
    let report = plan_report(&problem, &config, &result);
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
    Ok(match (&result.best, result.terminated) {
        (Some(_), _) => 0,
        (None, Termination::OpenExhausted) => EXIT_NO_PLAN,
        (None, Termination::Timeout) => EXIT_TIMEOUT,
    })
}

fn bench_cmd(a: &BenchArgs) -> Result<u8, Error> {
    let cfg = BenchConfig {
        template: a.scenario.template(a.base_seed)?,
        scenarios: a.scenarios,
        base_seed: a.base_seed,
        planners: a.planners.iter().map(|&p| p.into()).collect(),
        overrides: a.flags.overrides(),
        workers: a.workers,
        curve_points: a.curve_points,
    };
    let run = run_bench(&cfg)?;
    let mut csv = Vec::new();
    write_csv(&run.rows, &mut csv).map_err(|e| Error::io(&a.out, e))?;
    write(&a.out.join("bench.csv"), &csv)?;
    write(
        &a.out.join("aggregate.json"),
        format!("{}\n", serde_json::to_string_pretty(&run.aggregate)?).as_bytes(),
    )?;
    write(
        &a.out.join("traces.json"),
        format!("{}\n", serde_json::to_string_pretty(&run.runs)?).as_bytes(),
    )?;
    Ok(0)
}

fn theory_cmd(a: &TheoryArgs) -> Result<u8, Error> {
    let cfg = CampaignConfig {
        seed: a.seed,
        approx_cases: a.approx_cases,
        cost_cases: a.cost_cases,
        lipschitz_samples: a.lipschitz_samples,
        chains: a.chains,
        d_sim: a.d_sim,
        alpha: a.alpha,
        ..CampaignConfig::default()
    };
    let report = run_campaigns(&cfg)?;
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
    for c in report.campaigns.iter().filter(|c| !c.passed()) {
        eprintln!("{}: {} of {} cases violated", c.name, c.violations, c.cases);
    }
    Ok(if report.all_passed { 0 } else { EXIT_THEORY_VIOLATION })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("NEEDLESTEER_LOG")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::GenEnv(a) => gen_env(a),
        Command::Plan(a) => plan_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::ValidateTheory(a) => theory_cmd(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_BAD_INPUT)
        }
    }
}
