use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pomdp_voi::cases::{
    build_deck_model, build_three_component, synth_deck_spec, ConditionBasedPolicy, ControlVariant, DeckShape,
};
use pomdp_voi::io::report::{self, MetricRow};
use pomdp_voi::io::{self as pio, write_atomic, BoundsArchive};
use pomdp_voi::metrics::{self, ControlSetting};
use pomdp_voi::simulation::{
    self, ConditionRollout, GreedyPolicy, RolloutOptions, RolloutPolicy, ScriptedPolicy,
};
use pomdp_voi::solvers::{self, Policy, SolveStatus, SolverConfig, SolverKind};
use pomdp_voi::{Belief, Error, PomdpModel};

/// Inspection and maintenance planning with value-of-information metrics.
#[derive(Parser)]
#[command(name = "pomdp-voi", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "POMDP_VOI_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model; writes convergence.csv and bounds.json.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Continue from a bounds archive.
        #[arg(long)]
        warm: Option<PathBuf>,
    },
    /// Life-cycle or step-wise information metrics; writes metrics.csv.
    Metrics {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_parser = ["voi", "vopi", "voshm", "rvoci", "step-voi"])]
        metric: String,
        /// Second setting (permanent monitoring) for voshm.
        #[arg(long, env = "POMDP_VOI_MODEL2")]
        model2: Option<String>,
        /// Observation action (name or index) for rvoci.
        #[arg(long)]
        observation: Option<String>,
    },
    /// Three-component accuracy sweep; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        solver: SolverArgs,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long, default_value = "0.5:1.0:0.05", env = "POMDP_VOI_GRID")]
        grid: String,
        #[arg(long, default_value = ".", env = "POMDP_VOI_OUT")]
        out: PathBuf,
    },
    /// Monte Carlo rollouts of a policy; writes rollout.csv and optionally trace.csv.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Bounds archive, `condition:<levels>`, `do-nothing` or `always-repair`.
        #[arg(long)]
        policy: String,
        #[arg(long, default_value_t = 10_000, env = "POMDP_VOI_EPISODES")]
        episodes: usize,
        /// Steps per episode (default: truncation error below 0.01).
        #[arg(long, env = "POMDP_VOI_HORIZON")]
        horizon: Option<usize>,
        #[arg(long, default_value_t = 0.95, env = "POMDP_VOI_CONFIDENCE")]
        confidence: f64,
        /// Observe the initial state before the first decision.
        #[arg(long)]
        initial_observation: bool,
        /// Also write one recorded episode to trace.csv.
        #[arg(long)]
        trace: bool,
    },
    /// Convert a plain-text interchange file to the TOML model format.
    Convert {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a built-in model as TOML.
    Build {
        /// `three-component:p=0.9,setting=1` or `deck:seed=0,setting=1,rates=83,horizon=42`.
        spec: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "perseus", env = "POMDP_VOI_SOLVER")]
    solver: SolverKind,
    #[arg(long, default_value_t = 0.1, env = "POMDP_VOI_EPSILON")]
    epsilon: f64,
    #[arg(long, default_value_t = 0, env = "POMDP_VOI_SEED")]
    seed: u64,
    /// Wall-clock budget per solve in seconds.
    #[arg(long, default_value_t = 3600.0, env = "POMDP_VOI_MAX_SECONDS")]
    max_seconds: f64,
    #[arg(long, default_value_t = 10_000, env = "POMDP_VOI_MAX_ITERATIONS")]
    max_iterations: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            epsilon: self.epsilon,
            exploration_seed: self.seed,
            max_wall_seconds: Some(self.max_seconds),
            max_iterations: self.max_iterations,
            ..SolverConfig::default()
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Model file, or `three-component:...` / `deck:...` for a built-in model.
    #[arg(long, env = "POMDP_VOI_MODEL")]
    model: String,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = ".", env = "POMDP_VOI_OUT")]
    out: PathBuf,
}

enum Failure {
    Error(Error),
    Budget,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn builtin_options(rest: &str) -> Result<Vec<(String, String)>, Error> {
    rest.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("expected key=value, got '{kv}'")))
        })
        .collect()
}

fn opt<T: std::str::FromStr>(opts: &[(String, String)], key: &str, default: T) -> Result<T, Error> {
    match opts.iter().find(|(k, _)| k == key) {
        Some((_, v)) => v.parse().map_err(|_| Error::Config(format!("bad value for '{key}': {v}"))),
        None => Ok(default),
    }
}

fn load_model(spec: &str) -> Result<PomdpModel, Error> {
    if Path::new(spec).exists() {
        return pio::load_model(Path::new(spec));
    }
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    if !matches!(name, "three-component" | "deck") {
        // reports the missing file as an I/O error
        return pio::load_model(Path::new(spec));
    }
    let opts = builtin_options(rest)?;
    match name {
        "three-component" => {
            let setting = ControlVariant::from_number(opt(&opts, "setting", 1u8)?)?;
            build_three_component(opt(&opts, "p", 0.9)?, setting)
        }
        "deck" => {
            let d = DeckShape::default();
            let shape = DeckShape {
                conditions: opt(&opts, "conditions", d.conditions)?,
                rates: opt(&opts, "rates", d.rates)?,
                horizon: opt(&opts, "horizon", d.horizon)?,
            };
            let setting = ControlVariant::from_number(opt(&opts, "setting", 1u8)?)?;
            build_deck_model(&synth_deck_spec(opt(&opts, "seed", 0u64)?, shape), setting)
        }
        _ => unreachable!("checked above"),
    }
}

fn write(out: &Path, name: &str, text: &str) -> Result<(), Error> {
    write_atomic(&out.join(name), text.as_bytes())
}

fn cmd_solve(run: &RunArgs, warm: Option<&Path>) -> CmdResult {
    let model = load_model(&run.model)?;
    let config = run.solver.config();
    config.validate()?;
    let warm = warm.map(pio::load_archive).transpose()?;
    let root = model.initial_belief.clone();
    let outcome = solvers::solve(run.solver.solver, &model, &config, &root, warm.as_ref().map(|a| &a.bounds))?;
    let digest = metrics::config_digest(run.solver.solver, &config);
    write(&run.out, "convergence.csv", &report::convergence_csv(&outcome.history)?)?;
    let archive = BoundsArchive::new(outcome.bounds.clone(), &run.solver.solver.to_string(), &digest);
    write(&run.out, "bounds.json", &pio::archive::archive_to_string(&archive)?)?;
    println!(
        "lower={} upper={} gap={} status={:?}",
        pio::fmt9(outcome.lower()),
        pio::fmt9(outcome.upper()),
        pio::fmt9(outcome.gap()),
        outcome.status
    );
    if outcome.status == SolveStatus::BudgetExhausted {
        return Err(Failure::Budget);
    }
    Ok(())
}

fn observation_index(model: &PomdpModel, text: &str) -> Result<usize, Error> {
    model
        .observation_actions
        .iter()
        .position(|o| o.name == text)
        .or_else(|| text.parse().ok().filter(|&i: &usize| i < model.n_observation_actions()))
        .ok_or_else(|| Error::Config(format!("unknown observation action '{text}'")))
}

fn cmd_metrics(run: &RunArgs, metric: &str, model2: Option<&str>, observation: Option<&str>) -> CmdResult {
    let model = load_model(&run.model)?;
    let config = run.solver.config();
    config.validate()?;
    let kind = run.solver.solver;
    let root = model.initial_belief.clone();
    let mut rows = Vec::new();
    let row = |name: &str, s1: &str, s2: &str, estimate| MetricRow { metric: name.into(), setting1: s1.into(), setting2: s2.into(), estimate };
    match metric {
        "voi" => rows.push(row("voi", "default", "original", metrics::voi(&model, &root, kind, &config)?)),
        "vopi" => rows.push(row("vopi", "default", "perfect information", metrics::vopi(&model, &root, kind, &config)?)),
        "voshm" => {
            let other = model2.ok_or_else(|| Error::Config("voshm needs --model2".into()))?;
            let perm = load_model(other)?;
            let e = metrics::voshm(
                &ControlSetting::original("optional", model),
                &ControlSetting::explicit("permanent", perm),
                &root,
                kind,
                &config,
            )?;
            rows.push(row("voshm", "optional", "permanent", e));
        }
        "rvoci" => {
            let a_o = match observation {
                Some(t) => observation_index(&model, t)?,
                None => (0..model.n_observation_actions())
                    .find(|&a| !model.observation_actions[a].is_unit())
                    .ok_or_else(|| Error::Config("model has no nontrivial observation action".into()))?,
            };
            let e = metrics::rvoci(&model, a_o, &root, kind, &config)?;
            rows.push(row("rvoci", "original", &format!("permanent {}", model.observation_actions[a_o].name), e));
        }
        _ => {
            let outcome = solvers::solve(kind, &model, &config, &root, None)?;
            let lower = &outcome.bounds.lower;
            for a_m in model.available_maintenance() {
                for a_o in model.observation_choices(a_m) {
                    let voi = metrics::step_voi(&model, lower, &root, a_m, a_o)?;
                    let net = metrics::net_step_voi(&model, lower, &root, a_m, a_o)?;
                    let label = model.action_label(pomdp_voi::JointAction::new(a_m, a_o));
                    let est = |v| metrics::MetricEstimate { value: v, uncertainty: outcome.gap(), value1: v, value2: v, gap1: outcome.gap(), gap2: 0.0 };
                    rows.push(row("step-voi", &label, "", est(voi)));
                    rows.push(row("net-step-voi", &label, "", est(net)));
                }
            }
        }
    }
    write(&run.out, "metrics.csv", &report::metrics_csv(&rows)?)?;
    for r in &rows {
        println!("{} {} {} = {} ± {}", r.metric, r.setting1, r.setting2, pio::fmt9(r.estimate.value), pio::fmt9(r.estimate.uncertainty));
    }
    Ok(())
}

fn cmd_sweep(solver: &SolverArgs, grid: &str, out: &Path) -> CmdResult {
    let grid = metrics::parse_grid(grid)?;
    let config = solver.config();
    config.validate()?;
    let rows = metrics::accuracy_sweep(&grid, solver.solver, &config)?;
    write(out, "sweep.csv", &report::sweep_csv(&rows)?)?;
    for r in &rows {
        println!("p={} v1={} v2={} voshm={}", r.p, pio::fmt9(r.v1), pio::fmt9(r.v2), pio::fmt9(r.voshm()));
    }
    Ok(())
}

fn rollout_policy(model: &PomdpModel, spec: &str) -> Result<Box<dyn RolloutPolicy>, Error> {
    if let Some(levels) = spec.strip_prefix("condition:") {
        let n_levels = model
            .layout
            .as_ref()
            .map(|l| l.levels[0])
            .ok_or_else(|| Error::Config("condition-based policies need a factored model".into()))?;
        return Ok(Box::new(ConditionRollout(ConditionBasedPolicy::parse(n_levels, levels)?)));
    }
    match spec {
        "do-nothing" | "always-repair" => Ok(Box::new(ScriptedPolicy::named(model, spec)?)),
        path => {
            let archive = pio::load_archive(Path::new(path))?;
            if archive.n_states != model.n_states() {
                return Err(Error::Config("bounds archive does not match the model".into()));
            }
            Ok(Box::new(GreedyPolicy(Policy::new(archive.bounds.lower))))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    run: &RunArgs,
    policy: &str,
    episodes: usize,
    horizon: Option<usize>,
    confidence: f64,
    initial_observation: bool,
    trace: bool,
) -> CmdResult {
    let model = load_model(&run.model)?;
    let pol = rollout_policy(&model, policy)?;
    let horizon = horizon.unwrap_or_else(|| simulation::default_horizon(&model, 0.01));
    let opts = RolloutOptions {
        episodes,
        horizon,
        seed: run.solver.seed,
        confidence,
        retain_returns: false,
        initial_observation,
    };
    let b0: Belief = model.initial_belief.clone();
    let r = simulation::rollout(&model, pol.as_ref(), &b0, &opts)?;
    write(&run.out, "rollout.csv", &report::rollout_csv(policy, &r)?)?;
    if trace {
        let t = simulation::trace_realization(&model, pol.as_ref(), &b0, run.solver.seed, horizon, initial_observation)?;
        write(&run.out, "trace.csv", &report::trace_csv(&model, &t)?)?;
    }
    println!(
        "mean={} ± {} ({}% CI, N={}, H={}, truncation ≤ {})",
        pio::fmt9(r.mean),
        pio::fmt9(r.half_width()),
        confidence * 100.0,
        r.episodes,
        horizon,
        pio::fmt9(simulation::truncation_bound(&model, horizon))
    );
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    match &cli.command {
        Command::Solve { run, warm } => cmd_solve(run, warm.as_deref()),
        Command::Metrics { run, metric, model2, observation } => cmd_metrics(run, metric, model2.as_deref(), observation.as_deref()),
        Command::Sweep { solver, grid, out } => cmd_sweep(solver, grid, out),
        Command::Simulate { run, policy, episodes, horizon, confidence, initial_observation, trace } => {
            cmd_simulate(run, policy, *episodes, *horizon, *confidence, *initial_observation, *trace)
        }
        Command::Convert { input, out } => {
            let model = pio::parse_cassandra(&std::fs::read_to_string(input).map_err(Error::from)?)?;
            write_atomic(out, pio::write_model(&model)?.as_bytes())?;
            Ok(())
        }
        Command::Build { spec, out } => {
            let model = load_model(spec)?;
            write_atomic(out, pio::write_model(&model)?.as_bytes())?;
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::IncompatibleSettings(_) => 4,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Budget) => {
            eprintln!("warning: budget exhausted before convergence; results written");
            ExitCode::from(3)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
