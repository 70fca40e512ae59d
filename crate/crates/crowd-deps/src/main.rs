//! Thin command-line front end over [`crowd_deps::experiments`].
//!
//! One subcommand per experiment; every run writes `config.json` plus the
//! experiment's result files into `--out` and prints a short summary.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crowd_deps::allocation::{Policy, PolicyKind, TieBreak};
use crowd_deps::experiments::{
    self, ExperimentConfig, GridSpec, ReferenceFit,
};
use crowd_deps::inference::{CountSmoothing, DecisionPriors, FitMethod};
use crowd_deps::model::BetaParams;
use crowd_deps::{Error, Result};

#[derive(Parser)]
#[command(name = "crowd-deps", version, about = "Budget allocation and difficulty-distribution inference for binary crowdsourcing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Histogram the completion bias of the allocation policy.
    BiasDemo(BiasDemoArgs),
    /// Compare fitting methods across a grid of generating distributions.
    Sweep(SweepArgs),
    /// Trace divergence against the reference as the budget is spent.
    Timeseries(TimeseriesArgs),
    /// Measure responses needed to reach a divergence threshold.
    Threshold(ThresholdArgs),
    /// Replay a recorded response log at a fraction of its budget.
    Replay(ReplayArgs),
    /// Calibrate decision priors from gold-standard tasks.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Base seed; replicate r uses seed + r.
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Number of independent replicates.
    #[arg(long)]
    replicates: Option<u64>,
    /// Completion ratio threshold (must exceed 1).
    #[arg(long, default_value_t = 4.0)]
    c_ratio: f64,
    /// Completion smoothing constant (0 disables smoothing).
    #[arg(long, default_value_t = 1.0)]
    smoothing: f64,
    /// Response-allocation policy.
    #[arg(long, value_enum, default_value_t = PolicyArg::Requallo)]
    policy: PolicyArg,
    /// How the greedy policy breaks score ties.
    #[arg(long, value_enum, default_value_t = TieBreakArg::Seeded)]
    tie_break: TieBreakArg,
    /// Beta-fitting method for the debiased sample.
    #[arg(long, value_enum, default_value_t = FitArg::Mle)]
    fit: FitArg,
    /// JSON file with decision priors (as written by `calibrate`).
    #[arg(long)]
    priors: Option<PathBuf>,
    /// Posterior draws per task.
    #[arg(long, default_value_t = 1)]
    samples_per_task: u64,
    /// Output directory for config.json and result files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SyntheticArgs {
    /// Number of synthetic tasks.
    #[arg(long)]
    tasks: Option<usize>,
    /// Total response budget.
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args)]
struct BiasDemoArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    synthetic: SyntheticArgs,
    /// Alpha of the generating difficulty distribution.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Beta of the generating difficulty distribution.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    synthetic: SyntheticArgs,
    /// Cells per grid axis.
    #[arg(long, default_value_t = 10)]
    grid_steps: usize,
    #[arg(long, default_value_t = 0.5)]
    alpha_min: f64,
    #[arg(long, default_value_t = 5.0)]
    alpha_max: f64,
    #[arg(long, default_value_t = 0.5)]
    beta_min: f64,
    #[arg(long, default_value_t = 5.0)]
    beta_max: f64,
}

#[derive(Args)]
struct TimeseriesArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    synthetic: SyntheticArgs,
    /// Alpha of the generating difficulty distribution (synthetic mode).
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Beta of the generating difficulty distribution (synthetic mode).
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    /// Checkpoint spacing as a fraction of the budget.
    #[arg(long, default_value_t = 0.02)]
    checkpoint_every: f64,
    /// Replay this response log instead of generating tasks.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Replay budget as a fraction of recorded responses, in (0, 0.5].
    #[arg(long, default_value_t = 0.5)]
    budget_fraction: f64,
    /// Full-data fit the replay curves are compared against.
    #[arg(long, value_enum, default_value_t = ReferenceFitArg::WaldTransformed)]
    reference_fit: ReferenceFitArg,
}

#[derive(Args)]
struct ThresholdArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    synthetic: SyntheticArgs,
    /// Divergence threshold in nats.
    #[arg(long, default_value_t = 0.3)]
    threshold: f64,
    /// Generating distributions as comma-separated alpha:beta pairs.
    #[arg(long, default_value = "1:1,2:2,5:1,2:5")]
    configs: String,
    /// Checkpoint spacing as a fraction of the budget.
    #[arg(long, default_value_t = 0.02)]
    checkpoint_every: f64,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Recorded response log (CSV or TSV with task_id,worker_id,label).
    #[arg(long)]
    dataset: PathBuf,
    /// Replay budget as a fraction of recorded responses, in (0, 0.5].
    #[arg(long, default_value_t = 0.5)]
    budget_fraction: f64,
    /// Full-data fit the replicate fits are compared against.
    #[arg(long, value_enum, default_value_t = ReferenceFitArg::WaldTransformed)]
    reference_fit: ReferenceFitArg,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Recorded response log (CSV or TSV with task_id,worker_id,label).
    #[arg(long)]
    dataset: PathBuf,
    /// Gold-standard labels (CSV with task_id,true_label).
    #[arg(long)]
    gold: PathBuf,
    /// Replay budget as a fraction of recorded responses, in (0, 0.5].
    #[arg(long, default_value_t = 0.5)]
    budget_fraction: f64,
    /// How zero counts are smoothed before taking logarithms.
    #[arg(long, value_enum, default_value_t = CountSmoothingArg::AddOneIfZero)]
    count_smoothing: CountSmoothingArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Requallo,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieBreakArg {
    LowestId,
    Seeded,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitArg {
    Mle,
    Mom,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceFitArg {
    WaldTransformed,
    WaldSmoothed,
}

#[derive(Clone, Copy, ValueEnum)]
enum CountSmoothingArg {
    AddOneIfZero,
    AddOneAlways,
    Raw,
}

impl From<ReferenceFitArg> for ReferenceFit {
    fn from(arg: ReferenceFitArg) -> ReferenceFit {
        match arg {
            ReferenceFitArg::WaldTransformed => ReferenceFit::WaldTransformed,
            ReferenceFitArg::WaldSmoothed => ReferenceFit::WaldSmoothed,
        }
    }
}

impl From<CountSmoothingArg> for CountSmoothing {
    fn from(arg: CountSmoothingArg) -> CountSmoothing {
        match arg {
            CountSmoothingArg::AddOneIfZero => CountSmoothing::AddOneIfZero,
            CountSmoothingArg::AddOneAlways => CountSmoothing::AddOneAlways,
            CountSmoothingArg::Raw => CountSmoothing::Raw,
        }
    }
}

fn apply_common(cfg: &mut ExperimentConfig, common: &CommonArgs) -> Result<()> {
    cfg.seed = common.seed;
    if let Some(r) = common.replicates {
        cfg.replicates = r;
    }
    cfg.c_ratio = common.c_ratio;
    cfg.smoothing = common.smoothing;
    cfg.policy = Policy {
        kind: match common.policy {
            PolicyArg::Requallo => PolicyKind::RequalloGreedy,
            PolicyArg::Random => PolicyKind::UniformRandom,
        },
        tie_break: match common.tie_break {
            TieBreakArg::LowestId => TieBreak::LowestId,
            TieBreakArg::Seeded => TieBreak::Seeded,
        },
    };
    cfg.fit_method = match common.fit {
        FitArg::Mle => FitMethod::Mle,
        FitArg::Mom => FitMethod::Mom,
    };
    if let Some(path) = &common.priors {
        let text = std::fs::read_to_string(path)?;
        cfg.priors = serde_json::from_str::<DecisionPriors>(&text)?;
    }
    cfg.samples_per_task = common.samples_per_task;
    Ok(())
}

fn apply_synthetic(cfg: &mut ExperimentConfig, synthetic: &SyntheticArgs) {
    if let Some(tasks) = synthetic.tasks {
        cfg.n_tasks = tasks;
    }
    if let Some(budget) = synthetic.budget {
        cfg.budget = budget;
    }
}

fn checkpoint_fractions(every: f64) -> Result<Vec<f64>> {
    if !(every.is_finite() && every > 0.0 && every <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "checkpoint spacing must be in (0, 1], got {every}"
        )));
    }
    let count = (1.0 / every).round() as usize;
    Ok((1..=count).map(|i| (i as f64 * every).min(1.0)).collect())
}

fn parse_configs(text: &str) -> Result<Vec<BetaParams>> {
    let mut configs = Vec::new();
    for part in text.split(',') {
        let Some((a, b)) = part.split_once(':') else {
            return Err(Error::InvalidConfig(format!(
                "config {part:?} is not an alpha:beta pair"
            )));
        };
        let alpha: f64 = a.trim().parse().map_err(|_| {
            Error::InvalidConfig(format!("config alpha {a:?} is not a number"))
        })?;
        let beta: f64 = b.trim().parse().map_err(|_| {
            Error::InvalidConfig(format!("config beta {b:?} is not a number"))
        })?;
        configs.push(BetaParams::new(alpha, beta)?);
    }
    Ok(configs)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BiasDemo(args) => {
            let mut cfg = ExperimentConfig::bias_demo(&args.common.out);
            apply_common(&mut cfg, &args.common)?;
            apply_synthetic(&mut cfg, &args.synthetic);
            cfg.generating_prior = BetaParams::new(args.alpha, args.beta)?;
            let summary = experiments::run_bias_demo(&cfg)?;
            println!(
                "completed {} tasks, {} undecided",
                summary.n_completed, summary.n_undecided
            );
            println!(
                "completed-estimate modes at {:.3} and {:.3}, undecided mode at {:.3}",
                summary.completed_phat_lower_mode,
                summary.completed_phat_upper_mode,
                summary.undecided_phat_mode
            );
            println!(
                "completed-task true-difficulty density near 1/2 is {:.3}x the density near 0.1",
                summary.completed_true_density_ratio
            );
        }
        Command::Sweep(args) => {
            let mut cfg = ExperimentConfig::sweep(&args.common.out);
            apply_common(&mut cfg, &args.common)?;
            apply_synthetic(&mut cfg, &args.synthetic);
            cfg.grid = GridSpec {
                alpha_min: args.alpha_min,
                alpha_max: args.alpha_max,
                beta_min: args.beta_min,
                beta_max: args.beta_max,
                steps: args.grid_steps,
            };
            let summary = experiments::run_grid_sweep(&cfg)?;
            println!(
                "debiased fit beats the transformed baseline in {:.1}% of {} cells",
                100.0 * summary.deps_win_fraction,
                summary.cells.len()
            );
        }
        Command::Timeseries(args) => {
            let mut cfg = ExperimentConfig::timeseries(&args.common.out);
            apply_common(&mut cfg, &args.common)?;
            apply_synthetic(&mut cfg, &args.synthetic);
            cfg.generating_prior = BetaParams::new(args.alpha, args.beta)?;
            cfg.checkpoint_fractions = checkpoint_fractions(args.checkpoint_every)?;
            cfg.dataset = args.dataset.clone();
            cfg.budget_fraction = args.budget_fraction;
            cfg.reference_fit = args.reference_fit.into();
            let summary = experiments::run_timeseries(&cfg)?;
            println!("reference distribution: {}", summary.reference);
            for curve in &summary.curves {
                if let Some(last) = curve.points.last() {
                    println!(
                        "{}: {} checkpoints, final divergence {:.4} nats at budget {}",
                        curve.method,
                        curve.points.len(),
                        last.nats,
                        last.budget_used
                    );
                }
            }
        }
        Command::Threshold(args) => {
            let mut cfg = ExperimentConfig::threshold(&args.common.out);
            apply_common(&mut cfg, &args.common)?;
            apply_synthetic(&mut cfg, &args.synthetic);
            cfg.threshold_nats = args.threshold;
            cfg.synthetic_configs = parse_configs(&args.configs)?;
            cfg.checkpoint_fractions = checkpoint_fractions(args.checkpoint_every)?;
            let summary = experiments::run_threshold_study(&cfg)?;
            println!("responses to reach {} nats:", summary.threshold_nats);
            for row in &summary.rows {
                println!(
                    "  Beta({}, {}) {}: mean {:.0} responses ({} reached, {} censored)",
                    row.alpha_true,
                    row.beta_true,
                    row.method,
                    row.mean_responses,
                    row.n_reached,
                    row.n_censored
                );
            }
        }
        Command::Replay(args) => {
            let mut cfg = ExperimentConfig::replay(&args.dataset, &args.common.out);
            apply_common(&mut cfg, &args.common)?;
            cfg.budget_fraction = args.budget_fraction;
            cfg.reference_fit = args.reference_fit.into();
            let summary = experiments::run_replay(&cfg)?;
            println!(
                "replayed {} responses per replicate; full-data reference {}",
                summary.budget, summary.reference
            );
            for m in &summary.methods {
                println!(
                    "  {}: alpha {:.3} [{:.3}, {:.3}], beta {:.3} [{:.3}, {:.3}], {} fits ({} failed)",
                    m.method,
                    m.alpha_mean,
                    m.alpha_ci.0,
                    m.alpha_ci.1,
                    m.beta_mean,
                    m.beta_ci.0,
                    m.beta_ci.1,
                    m.n_fits,
                    m.n_failed
                );
            }
        }
        Command::Calibrate(args) => {
            let mut cfg = ExperimentConfig::calibrate(&args.dataset, &args.gold, &args.common.out);
            apply_common(&mut cfg, &args.common)?;
            cfg.budget_fraction = args.budget_fraction;
            cfg.count_smoothing = args.count_smoothing.into();
            let summary = experiments::run_calibrate(&cfg)?;
            let o = &summary.outcome;
            println!(
                "pooled gold outcomes: n0={} (right {}, wrong {}), n1={} (right {}, wrong {})",
                o.n0, o.m00, o.m01, o.n1, o.m11, o.m10
            );
            println!(
                "calibrated priors: negative {}, undecided {}, positive {}",
                summary.priors.neg, summary.priors.zero, summary.priors.pos
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
