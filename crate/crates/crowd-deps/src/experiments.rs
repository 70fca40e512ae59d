//! Experiment orchestration and result emission.
//!
//! Every experiment is a pure function of its resolved [`ExperimentConfig`]:
//! rerunning with the same config writes byte-identical output files. Each
//! run directory receives `config.json` plus the experiment's own CSV/JSON
//! emissions. Replicate `r` of a run with base seed `s` uses seed `s + r`;
//! grid-style experiments stride their seeds by cell so no two replicates
//! anywhere share one.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{
    run_allocation, run_allocation_checkpointed, CompletionConfig, Policy,
};
use crate::dataset::{load_dataset, load_gold, DatasetDescriptor, DatasetFormat};
use crate::error::{Error, Result};
use crate::evaluation::{
    kl_beta_beta, responses_to_threshold, CurvePoint, EfficiencyCurve, MethodKind,
};
use crate::inference::{
    calibrate_priors_with, deps_pipeline, fit_wald, CountSmoothing, DecisionPriors, FitMethod,
    FitResult, GoldStandardOutcome, WaldVariant,
};
use crate::model::{
    generate_synthetic_problem, BetaParams, ProblemInstance, TaskSource, TaskState,
};
use crate::rng::{replicate_seed, stage_rng, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BiasDemo,
    Sweep,
    Timeseries,
    Threshold,
    Replay,
    Calibrate,
}

/// Rectangular grid of generating parameters for the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub steps: usize,
}

impl Default for GridSpec {
    fn default() -> GridSpec {
        GridSpec { alpha_min: 0.5, alpha_max: 5.0, beta_min: 0.5, beta_max: 5.0, steps: 10 }
    }
}

impl GridSpec {
    /// Cell centers in row-major order (alpha outer, beta inner).
    pub fn cells(&self) -> Result<Vec<(f64, f64)>> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("grid needs at least one step".into()));
        }
        let axis = |lo: f64, hi: f64| -> Vec<f64> {
            if self.steps == 1 {
                vec![lo]
            } else {
                (0..self.steps)
                    .map(|i| lo + (hi - lo) * i as f64 / (self.steps - 1) as f64)
                    .collect()
            }
        };
        let alphas = axis(self.alpha_min, self.alpha_max);
        let betas = axis(self.beta_min, self.beta_max);
        let mut cells = Vec::with_capacity(self.steps * self.steps);
        for &a in &alphas {
            for &b in &betas {
                if a <= 0.0 || b <= 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "grid cell ({a}, {b}) is not a valid beta parameter pair"
                    )));
                }
                cells.push((a, b));
            }
        }
        Ok(cells)
    }
}

/// Which full-data fit anchors the replay comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceFit {
    WaldTransformed,
    WaldSmoothed,
}

impl ReferenceFit {
    fn variant(self) -> WaldVariant {
        match self {
            ReferenceFit::WaldTransformed => WaldVariant::Transformed,
            ReferenceFit::WaldSmoothed => WaldVariant::Smoothed,
        }
    }

    fn record_name(self) -> &'static str {
        match self {
            ReferenceFit::WaldTransformed => "reference-wald-transformed",
            ReferenceFit::WaldSmoothed => "reference-wald-smoothed",
        }
    }
}

/// Fully resolved experiment configuration. Constructors fill in the
/// documented defaults per experiment; the CLI and examples override fields
/// before running.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub replicates: u64,
    pub c_ratio: f64,
    pub smoothing: f64,
    pub policy: Policy,
    pub fit_method: FitMethod,
    pub priors: DecisionPriors,
    pub samples_per_task: u64,
    /// Synthetic task count.
    pub n_tasks: usize,
    /// Synthetic response budget.
    pub budget: u64,
    /// Replay budget as a fraction of recorded responses, in (0, 0.5].
    pub budget_fraction: f64,
    /// Checkpoint positions as fractions of the budget.
    pub checkpoint_fractions: Vec<f64>,
    pub threshold_nats: f64,
    /// Difficulty distribution for single-configuration synthetic runs.
    pub generating_prior: BetaParams,
    /// Difficulty distributions covered by the threshold study.
    pub synthetic_configs: Vec<BetaParams>,
    pub grid: GridSpec,
    pub dataset: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub reference_fit: ReferenceFit,
    pub count_smoothing: CountSmoothing,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    fn base(experiment: ExperimentKind, output_dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            experiment,
            seed: 17,
            replicates: 100,
            c_ratio: 4.0,
            smoothing: 1.0,
            policy: Policy::requallo_seeded_ties(),
            fit_method: FitMethod::Mle,
            priors: DecisionPriors::synthetic(),
            samples_per_task: 1,
            n_tasks: 1000,
            budget: 10_000,
            budget_fraction: 0.5,
            checkpoint_fractions: (1..=50).map(|i| i as f64 * 0.02).collect(),
            threshold_nats: 0.3,
            generating_prior: BetaParams::new(1.0, 1.0).unwrap(),
            synthetic_configs: vec![
                BetaParams::new(1.0, 1.0).unwrap(),
                BetaParams::new(2.0, 2.0).unwrap(),
                BetaParams::new(5.0, 1.0).unwrap(),
                BetaParams::new(2.0, 5.0).unwrap(),
            ],
            grid: GridSpec::default(),
            dataset: None,
            gold: None,
            reference_fit: ReferenceFit::WaldTransformed,
            count_smoothing: CountSmoothing::AddOneIfZero,
            output_dir: output_dir.to_path_buf(),
        }
    }

    /// 1000 uniform tasks, a 10x budget, 100 replicates.
    pub fn bias_demo(output_dir: &Path) -> ExperimentConfig {
        Self::base(ExperimentKind::BiasDemo, output_dir)
    }

    /// 10x10 grid over (0.5..5)^2, 200 tasks, 2000 responses, 50 replicates.
    pub fn sweep(output_dir: &Path) -> ExperimentConfig {
        let mut cfg = Self::base(ExperimentKind::Sweep, output_dir);
        cfg.replicates = 50;
        cfg.n_tasks = 200;
        cfg.budget = 2000;
        cfg
    }

    /// Divergence-versus-budget curves for one configuration.
    pub fn timeseries(output_dir: &Path) -> ExperimentConfig {
        let mut cfg = Self::base(ExperimentKind::Timeseries, output_dir);
        cfg.n_tasks = 200;
        cfg.budget = 2000;
        cfg.generating_prior = BetaParams::new(2.0, 2.0).unwrap();
        cfg
    }

    /// Mean responses to reach the divergence threshold, per method, for the
    /// documented synthetic configurations.
    pub fn threshold(output_dir: &Path) -> ExperimentConfig {
        let mut cfg = Self::base(ExperimentKind::Threshold, output_dir);
        cfg.n_tasks = 200;
        cfg.budget = 2000;
        cfg
    }

    /// Replay a recorded response log at half budget and compare fits
    /// against the full-data reference.
    pub fn replay(dataset: &Path, output_dir: &Path) -> ExperimentConfig {
        let mut cfg = Self::base(ExperimentKind::Replay, output_dir);
        cfg.dataset = Some(dataset.to_path_buf());
        cfg.priors = DecisionPriors::real_data();
        cfg
    }

    /// Calibrate decided priors from gold-standard tasks in a replay run.
    pub fn calibrate(dataset: &Path, gold: &Path, output_dir: &Path) -> ExperimentConfig {
        let mut cfg = Self::base(ExperimentKind::Calibrate, output_dir);
        cfg.dataset = Some(dataset.to_path_buf());
        cfg.gold = Some(gold.to_path_buf());
        cfg.priors = DecisionPriors::real_data();
        cfg
    }

    fn completion(&self) -> Result<CompletionConfig> {
        CompletionConfig::new(self.c_ratio, self.smoothing)
    }

    fn validate_common(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        Ok(())
    }

    fn write_config(&self) -> Result<()> {
        std::fs::create_dir_all(&self.output_dir)?;
        let file = std::fs::File::create(self.output_dir.join("config.json"))?;
        let mut out = std::io::BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        Ok(())
    }
}

/// Fits one method on a set of task states.
fn fit_method_on(
    method: MethodKind,
    states: &[TaskState],
    n_tasks: usize,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<FitResult> {
    match method {
        MethodKind::Deps => deps_pipeline(states, &cfg.priors, cfg.fit_method, seed),
        MethodKind::WaldSmoothed => fit_wald(states, WaldVariant::Smoothed, n_tasks),
        MethodKind::WaldTransformed => fit_wald(states, WaldVariant::Transformed, n_tasks),
    }
}

/// Converts checkpoint fractions into sorted unique response counts.
fn checkpoint_marks(fractions: &[f64], budget: u64) -> Result<Vec<u64>> {
    if fractions.is_empty() {
        return Err(Error::InvalidConfig("at least one checkpoint is required".into()));
    }
    let mut marks = Vec::with_capacity(fractions.len());
    for &f in fractions {
        if !(f.is_finite() && f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "checkpoint fraction {f} is outside (0, 1]"
            )));
        }
        marks.push(((f * budget as f64).round() as u64).clamp(1, budget));
    }
    marks.sort_unstable();
    marks.dedup();
    Ok(marks)
}

/// Percentile bootstrap interval for the mean of `values`.
fn bootstrap_mean_ci(values: &[f64], resamples: u64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    debug_assert!(!values.is_empty());
    let n = values.len();
    let mut means = Vec::with_capacity(resamples as usize);
    for _ in 0..resamples {
        let mut acc = 0.0;
        for _ in 0..n {
            acc += values[rng.gen_range(0..n)];
        }
        means.push(acc / n as f64);
    }
    means.sort_by(f64::total_cmp);
    (percentile(&means, 0.025), percentile(&means, 0.975))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

const BOOTSTRAP_RESAMPLES: u64 = 1000;

// ---------------------------------------------------------------------------
// Bias demo

const HIST_BINS: usize = 20;
const HIST_WIDTH: f64 = 0.05;

fn hist_bin(v: f64) -> usize {
    ((v / HIST_WIDTH) as usize).min(HIST_BINS - 1)
}

fn bin_center(bin: usize) -> f64 {
    (bin as f64 + 0.5) * HIST_WIDTH
}

/// Histogram signature of the allocation bias.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasDemoSummary {
    /// Center of the modal completed-estimate bin below 1/2.
    pub completed_phat_lower_mode: f64,
    /// Center of the modal completed-estimate bin above 1/2.
    pub completed_phat_upper_mode: f64,
    /// Center of the modal undecided-estimate bin.
    pub undecided_phat_mode: f64,
    /// Completed-task true-difficulty density near 1/2 relative to near 0.1.
    pub completed_true_density_ratio: f64,
    pub n_completed: u64,
    pub n_undecided: u64,
}

/// Runs the histogram demonstration of allocation bias: completed tasks pile
/// at the decision boundaries and under-represent difficulties near 1/2.
///
/// Emits `results.csv` with one row per (series, bin):
/// `series,bin_lo,bin_hi,count` for series `true-p-all`, `true-p-completed`,
/// `phat-completed`, `phat-undecided`.
pub fn run_bias_demo(cfg: &ExperimentConfig) -> Result<BiasDemoSummary> {
    cfg.validate_common()?;
    let completion = cfg.completion()?;
    cfg.write_config()?;

    let mut true_all = [0u64; HIST_BINS];
    let mut true_completed = [0u64; HIST_BINS];
    let mut phat_completed = [0u64; HIST_BINS];
    let mut phat_undecided = [0u64; HIST_BINS];

    for r in 0..cfg.replicates {
        let seed = replicate_seed(cfg.seed, r);
        let problem = generate_synthetic_problem(cfg.n_tasks, cfg.generating_prior, seed)?;
        let trace = run_allocation(&problem, cfg.budget, &completion, cfg.policy, seed)?;
        let TaskSource::Synthetic(tasks) = &problem.source else { unreachable!() };
        for (task, state) in tasks.iter().zip(&trace.final_states) {
            let smoothed = (state.a as f64 + 1.0) / (state.n() as f64 + 2.0);
            true_all[hist_bin(task.p)] += 1;
            if state.d != 0 {
                true_completed[hist_bin(task.p)] += 1;
                phat_completed[hist_bin(smoothed)] += 1;
            } else {
                phat_undecided[hist_bin(smoothed)] += 1;
            }
        }
    }

    let series: [(&str, &[u64; HIST_BINS]); 4] = [
        ("true-p-all", &true_all),
        ("true-p-completed", &true_completed),
        ("phat-completed", &phat_completed),
        ("phat-undecided", &phat_undecided),
    ];
    let mut out = std::io::BufWriter::new(std::fs::File::create(
        cfg.output_dir.join("results.csv"),
    )?);
    writeln!(out, "series,bin_lo,bin_hi,count")?;
    for (name, counts) in series {
        for (bin, count) in counts.iter().enumerate() {
            writeln!(
                out,
                "{name},{:.2},{:.2},{count}",
                bin as f64 * HIST_WIDTH,
                (bin + 1) as f64 * HIST_WIDTH
            )?;
        }
    }
    out.flush()?;
    drop(out);

    let argmax = |counts: &[u64]| {
        counts
            .iter()
            .enumerate()
            .max_by_key(|&(i, c)| (*c, std::cmp::Reverse(i)))
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    let lower_mode = argmax(&phat_completed[..HIST_BINS / 2]);
    let upper_mode = HIST_BINS / 2 + argmax(&phat_completed[HIST_BINS / 2..]);

    // density near 1/2 and near 0.1, each averaged over the two adjacent bins
    let density = |counts: &[u64; HIST_BINS], at: f64| {
        let left = hist_bin(at - HIST_WIDTH / 2.0);
        let right = hist_bin(at + HIST_WIDTH / 2.0);
        (counts[left] + counts[right]) as f64 / 2.0
    };
    let ratio = density(&true_completed, 0.5) / density(&true_completed, 0.1);

    Ok(BiasDemoSummary {
        completed_phat_lower_mode: bin_center(lower_mode),
        completed_phat_upper_mode: bin_center(upper_mode),
        undecided_phat_mode: bin_center(argmax(&phat_undecided)),
        completed_true_density_ratio: ratio,
        n_completed: true_completed.iter().sum(),
        n_undecided: phat_undecided.iter().sum(),
    })
}

// ---------------------------------------------------------------------------
// Grid sweep

/// Mean divergence per method for one generating-parameter cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCellResult {
    pub alpha_true: f64,
    pub beta_true: f64,
    /// Mean nats per method; `None` when every replicate's fit failed.
    pub mean_nats: [Option<f64>; 3],
    /// Failed fits per method.
    pub failures: [u64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSummary {
    pub cells: Vec<GridCellResult>,
    /// Fraction of cells where the debiased fit beats the transformed Wald
    /// fit (cells where either mean is missing count as losses).
    pub deps_win_fraction: f64,
}

/// For each grid cell: generate, allocate, fit every method on the final
/// states, and average the divergence to the generating distribution over
/// replicates.
///
/// Emits `results.csv` (`alpha_true,beta_true,method,nats`, skipping
/// method/cell pairs whose every fit failed) and `failures.csv`
/// (`alpha_true,beta_true,method,failed,replicates`, all pairs).
pub fn run_grid_sweep(cfg: &ExperimentConfig) -> Result<GridSummary> {
    cfg.validate_common()?;
    let completion = cfg.completion()?;
    let cells = cfg.grid.cells()?;
    cfg.write_config()?;

    let mut results = Vec::with_capacity(cells.len());
    for (ci, &(alpha, beta)) in cells.iter().enumerate() {
        let truth = BetaParams::new(alpha, beta)?;
        let mut nats: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut failures = [0u64; 3];
        for r in 0..cfg.replicates {
            let seed = replicate_seed(cfg.seed, ci as u64 * cfg.replicates + r);
            let problem = generate_synthetic_problem(cfg.n_tasks, truth, seed)?;
            let trace = run_allocation(&problem, cfg.budget, &completion, cfg.policy, seed)?;
            for (mi, method) in MethodKind::ALL.into_iter().enumerate() {
                match fit_method_on(method, &trace.final_states, cfg.n_tasks, cfg, seed) {
                    Ok(fit) => nats[mi].push(kl_beta_beta(truth, fit.params).nats),
                    Err(_) => failures[mi] += 1,
                }
            }
        }
        let mean_nats = [
            (!nats[0].is_empty()).then(|| mean(&nats[0])),
            (!nats[1].is_empty()).then(|| mean(&nats[1])),
            (!nats[2].is_empty()).then(|| mean(&nats[2])),
        ];
        results.push(GridCellResult { alpha_true: alpha, beta_true: beta, mean_nats, failures });
    }

    let mut out = std::io::BufWriter::new(std::fs::File::create(
        cfg.output_dir.join("results.csv"),
    )?);
    writeln!(out, "alpha_true,beta_true,method,nats")?;
    for cell in &results {
        for (mi, method) in MethodKind::ALL.into_iter().enumerate() {
            if let Some(nats) = cell.mean_nats[mi] {
                writeln!(out, "{},{},{},{nats}", cell.alpha_true, cell.beta_true, method)?;
            }
        }
    }
    out.flush()?;
    drop(out);

    let mut fail_out = std::io::BufWriter::new(std::fs::File::create(
        cfg.output_dir.join("failures.csv"),
    )?);
    writeln!(fail_out, "alpha_true,beta_true,method,failed,replicates")?;
    for cell in &results {
        for (mi, method) in MethodKind::ALL.into_iter().enumerate() {
            writeln!(
                fail_out,
                "{},{},{},{},{}",
                cell.alpha_true, cell.beta_true, method, cell.failures[mi], cfg.replicates
            )?;
        }
    }
    fail_out.flush()?;
    drop(fail_out);

    let wins = results
        .iter()
        .filter(|c| matches!((c.mean_nats[0], c.mean_nats[2]), (Some(d), Some(w)) if d < w))
        .count();
    Ok(GridSummary {
        deps_win_fraction: wins as f64 / results.len() as f64,
        cells: results,
    })
}

// ---------------------------------------------------------------------------
// Timeseries

/// Per-checkpoint confidence band for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPoint {
    pub budget_used: u64,
    pub method: MethodKind,
    pub nats_lo: f64,
    pub nats_hi: f64,
    pub n_fits: u64,
    pub n_failed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeseriesSummary {
    /// The distribution all fits are compared against: the generating prior
    /// in synthetic mode, the full-data fit in replay mode.
    pub reference: BetaParams,
    /// Mean divergence curves, one per method.
    pub curves: Vec<EfficiencyCurve>,
    pub bands: Vec<BandPoint>,
}

/// Divergence-versus-budget curves for one configuration (synthetic prior,
/// or a replay dataset when `cfg.dataset` is set).
///
/// Fits every method at every checkpoint of every replicate, averages, and
/// attaches bootstrap 95% bands. Emits `curves.csv`
/// (`budget_used,method,nats`) and `bands.csv`
/// (`budget_used,method,nats_lo,nats_hi,n_fits,n_failed`).
pub fn run_timeseries(cfg: &ExperimentConfig) -> Result<TimeseriesSummary> {
    cfg.validate_common()?;
    let completion = cfg.completion()?;

    enum Mode {
        Synthetic,
        Replay(ProblemInstance),
    }
    let (mode, budget, n_tasks, reference) = match &cfg.dataset {
        None => (Mode::Synthetic, cfg.budget, cfg.n_tasks, cfg.generating_prior),
        Some(path) => {
            let (instance, desc) = load_dataset(path, DatasetFormat::from_path(path), None)?;
            let budget = replay_budget(cfg, &desc)?;
            let reference = full_data_reference(&instance, cfg.reference_fit)?.params;
            (Mode::Replay(instance), budget, desc.n_tasks, reference)
        }
    };
    let marks = checkpoint_marks(&cfg.checkpoint_fractions, budget)?;
    cfg.write_config()?;

    // nats[method][mark] = per-replicate fits that succeeded
    let mut nats: Vec<Vec<Vec<f64>>> =
        vec![vec![Vec::new(); marks.len()]; MethodKind::ALL.len()];
    let mut failures: Vec<Vec<u64>> = vec![vec![0; marks.len()]; MethodKind::ALL.len()];

    for r in 0..cfg.replicates {
        let seed = replicate_seed(cfg.seed, r);
        let problem = match &mode {
            Mode::Synthetic => generate_synthetic_problem(n_tasks, cfg.generating_prior, seed)?,
            Mode::Replay(instance) => instance.shuffled_pools(seed),
        };
        let trace =
            run_allocation_checkpointed(&problem, budget, &completion, cfg.policy, seed, &marks)?;
        for snap in &trace.snapshots {
            let mark_index = marks.binary_search(&snap.checkpoint_t).expect("snapshot at mark");
            for (mi, method) in MethodKind::ALL.into_iter().enumerate() {
                match fit_method_on(method, &snap.states, n_tasks, cfg, seed) {
                    Ok(fit) => {
                        nats[mi][mark_index].push(kl_beta_beta(reference, fit.params).nats)
                    }
                    Err(_) => failures[mi][mark_index] += 1,
                }
            }
        }
    }

    let mut curves = Vec::new();
    let mut bands = Vec::new();
    let mut boot_rng = stage_rng(cfg.seed, Stage::Bootstrap);
    for (mi, method) in MethodKind::ALL.into_iter().enumerate() {
        let mut points = Vec::new();
        for (k, &mark) in marks.iter().enumerate() {
            let values = &nats[mi][k];
            if values.is_empty() {
                continue;
            }
            points.push(CurvePoint { budget_used: mark, nats: mean(values) });
            let (lo, hi) = bootstrap_mean_ci(values, BOOTSTRAP_RESAMPLES, &mut boot_rng);
            bands.push(BandPoint {
                budget_used: mark,
                method,
                nats_lo: lo,
                nats_hi: hi,
                n_fits: values.len() as u64,
                n_failed: failures[mi][k],
            });
        }
        curves.push(EfficiencyCurve::new(method, points)?);
    }

    let mut out = std::io::BufWriter::new(std::fs::File::create(
        cfg.output_dir.join("curves.csv"),
    )?);
    writeln!(out, "budget_used,method,nats")?;
    for curve in &curves {
        for p in &curve.points {
            writeln!(out, "{},{},{}", p.budget_used, curve.method, p.nats)?;
        }
    }
    out.flush()?;
    drop(out);

    let mut band_out = std::io::BufWriter::new(std::fs::File::create(
        cfg.output_dir.join("bands.csv"),
    )?);
    writeln!(band_out, "budget_used,method,nats_lo,nats_hi,n_fits,n_failed")?;
    for b in &bands {
        writeln!(
            band_out,
            "{},{},{},{},{},{}",
            b.budget_used, b.method, b.nats_lo, b.nats_hi, b.n_fits, b.n_failed
        )?;
    }
    band_out.flush()?;
    drop(band_out);

    Ok(TimeseriesSummary { reference, curves, bands })
}

// ---------------------------------------------------------------------------
// Threshold study

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub alpha_true: f64,
    pub beta_true: f64,
    pub method: MethodKind,
    /// Mean responses to reach the threshold, with replicates that never
    /// reached it counted at the full budget (a conservative lower bound).
    pub mean_responses: f64,
    pub n_reached: u64,
    pub n_censored: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSummary {
    pub threshold_nats: f64,
    pub rows: Vec<ThresholdRow>,
}

/// Mean responses needed to bring the divergence below the threshold, per
/// method, for each configured synthetic difficulty distribution.
/// Replicates whose curve never crosses are censored at the budget and
/// reported, not dropped. Emits `results.csv`
/// (`alpha_true,beta_true,method,mean_responses,n_reached,n_censored`).
pub fn run_threshold_study(cfg: &ExperimentConfig) -> Result<ThresholdSummary> {
    cfg.validate_common()?;
    let completion = cfg.completion()?;
    if cfg.synthetic_configs.is_empty() {
        return Err(Error::InvalidConfig(
            "threshold study needs at least one synthetic configuration".into(),
        ));
    }
    if !(cfg.threshold_nats.is_finite() && cfg.threshold_nats >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "threshold must be finite and nonnegative, got {}",
            cfg.threshold_nats
        )));
    }
    let marks = checkpoint_marks(&cfg.checkpoint_fractions, cfg.budget)?;
    cfg.write_config()?;

    let mut rows = Vec::new();
    for (ci, &truth) in cfg.synthetic_configs.iter().enumerate() {
        // responses[method] = per-replicate crossing point (censored at budget)
        let mut responses: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut reached = [0u64; 3];
        for r in 0..cfg.replicates {
            let seed = replicate_seed(cfg.seed, ci as u64 * cfg.replicates + r);
            let problem = generate_synthetic_problem(cfg.n_tasks, truth, seed)?;
            let trace = run_allocation_checkpointed(
                &problem, cfg.budget, &completion, cfg.policy, seed, &marks,
            )?;
            for (mi, method) in MethodKind::ALL.into_iter().enumerate() {
                let mut points = Vec::new();
                for snap in &trace.snapshots {
                    if let Ok(fit) = fit_method_on(method, &snap.states, cfg.n_tasks, cfg, seed) {
                        points.push(CurvePoint {
                            budget_used: snap.checkpoint_t,
                            nats: kl_beta_beta(truth, fit.params).nats,
                        });
                    }
                }
                let curve = EfficiencyCurve::new(method, points)?;
                match responses_to_threshold(&curve, cfg.threshold_nats) {
                    Some(t) => {
                        reached[mi] += 1;
                        responses[mi].push(t as f64);
                    }
                    None => responses[mi].push(cfg.budget as f64),
                }
            }
        }
        for (mi, method) in MethodKind::ALL.into_iter().enumerate() {
            rows.push(ThresholdRow {
                alpha_true: truth.alpha(),
                beta_true: truth.beta(),
                method,
                mean_responses: mean(&responses[mi]),
                n_reached: reached[mi],
                n_censored: cfg.replicates - reached[mi],
            });
        }
    }

    let mut out = std::io::BufWriter::new(std::fs::File::create(
        cfg.output_dir.join("results.csv"),
    )?);
    writeln!(out, "alpha_true,beta_true,method,mean_responses,n_reached,n_censored")?;
    for row in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.alpha_true,
            row.beta_true,
            row.method,
            row.mean_responses,
            row.n_reached,
            row.n_censored
        )?;
    }
    out.flush()?;
    drop(out);

    Ok(ThresholdSummary { threshold_nats: cfg.threshold_nats, rows })
}

// ---------------------------------------------------------------------------
// Replay

/// One emitted fit record, matching the documented JSON schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitRecord {
    pub method: String,
    pub alpha: f64,
    pub beta: f64,
    pub converged: bool,
    pub iterations: u64,
    pub n_samples: u64,
    pub seed: u64,
}

impl FitRecord {
    fn new(method: &str, fit: &FitResult, seed: u64) -> FitRecord {
        FitRecord {
            method: method.to_string(),
            alpha: fit.params.alpha(),
            beta: fit.params.beta(),
            converged: fit.converged,
            iterations: fit.iterations,
            n_samples: fit.n_samples,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayMethodSummary {
    pub method: MethodKind,
    pub alpha_mean: f64,
    pub beta_mean: f64,
    pub alpha_ci: (f64, f64),
    pub beta_ci: (f64, f64),
    pub alpha_abs_err: f64,
    pub beta_abs_err: f64,
    pub n_fits: u64,
    pub n_failed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySummary {
    pub reference: BetaParams,
    pub budget: u64,
    pub methods: Vec<ReplayMethodSummary>,
}

fn replay_budget(cfg: &ExperimentConfig, desc: &DatasetDescriptor) -> Result<u64> {
    if !(cfg.budget_fraction > 0.0 && cfg.budget_fraction <= 0.5) {
        return Err(Error::InvalidConfig(format!(
            "replay budget fraction must be in (0, 0.5], got {}",
            cfg.budget_fraction
        )));
    }
    let budget = (cfg.budget_fraction * desc.responses_total as f64).floor() as u64;
    if budget == 0 {
        return Err(Error::InvalidConfig(format!(
            "budget fraction {} of {} responses leaves no budget",
            cfg.budget_fraction, desc.responses_total
        )));
    }
    Ok(budget)
}

/// Per-task states of the complete recorded log (order irrelevant: counts).
fn full_data_states(instance: &ProblemInstance) -> Vec<TaskState> {
    let TaskSource::Replay(pools) = &instance.source else {
        unreachable!("replay instances only");
    };
    pools
        .iter()
        .map(|pool| {
            let a = pool.iter().filter(|r| r.label.is_one()).count() as u64;
            TaskState::new(a, pool.len() as u64 - a, 0)
        })
        .collect()
}

fn full_data_reference(instance: &ProblemInstance, reference: ReferenceFit) -> Result<FitResult> {
    let states = full_data_states(instance);
    fit_wald(&states, reference.variant(), states.len())
}

/// Replays a recorded response log under the allocation policy at the
/// configured budget fraction, fits every method per replicate, and compares
/// against the full-data reference fit.
///
/// Emits `results.csv` (per-method means, bootstrap CIs, and absolute errors
/// against the reference) and `fits.json` (every individual fit record plus
/// the reference).
pub fn run_replay(cfg: &ExperimentConfig) -> Result<ReplaySummary> {
    cfg.validate_common()?;
    let completion = cfg.completion()?;
    let Some(dataset) = &cfg.dataset else {
        return Err(Error::InvalidConfig("replay needs a dataset".into()));
    };
    let (instance, desc) = load_dataset(dataset, DatasetFormat::from_path(dataset), None)?;
    let budget = replay_budget(cfg, &desc)?;
    let reference = full_data_reference(&instance, cfg.reference_fit)?;
    cfg.write_config()?;

    let mut alphas: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut betas: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut failed = [0u64; 3];
    let mut records =
        vec![FitRecord::new(cfg.reference_fit.record_name(), &reference, cfg.seed)];

    for r in 0..cfg.replicates {
        let seed = replicate_seed(cfg.seed, r);
        let shuffled = instance.shuffled_pools(seed);
        let trace = run_allocation(&shuffled, budget, &completion, cfg.policy, seed)?;
        for (mi, method) in MethodKind::ALL.into_iter().enumerate() {
            match fit_method_on(method, &trace.final_states, desc.n_tasks, cfg, seed) {
                Ok(fit) => {
                    alphas[mi].push(fit.params.alpha());
                    betas[mi].push(fit.params.beta());
                    records.push(FitRecord::new(method.name(), &fit, seed));
                }
                Err(e) => {
                    failed[mi] += 1;
                    log::warn!("replicate {r}: {method} fit failed: {e}");
                }
            }
        }
    }

    let mut boot_rng = stage_rng(cfg.seed, Stage::Bootstrap);
    let mut methods = Vec::new();
    for (mi, method) in MethodKind::ALL.into_iter().enumerate() {
        if alphas[mi].is_empty() {
            return Err(Error::FitFailed(format!(
                "every {method} fit failed across {} replicates",
                cfg.replicates
            )));
        }
        let alpha_mean = mean(&alphas[mi]);
        let beta_mean = mean(&betas[mi]);
        let alpha_ci = bootstrap_mean_ci(&alphas[mi], BOOTSTRAP_RESAMPLES, &mut boot_rng);
        let beta_ci = bootstrap_mean_ci(&betas[mi], BOOTSTRAP_RESAMPLES, &mut boot_rng);
        methods.push(ReplayMethodSummary {
            method,
            alpha_mean,
            beta_mean,
            alpha_ci,
            beta_ci,
            alpha_abs_err: (alpha_mean - reference.params.alpha()).abs(),
            beta_abs_err: (beta_mean - reference.params.beta()).abs(),
            n_fits: alphas[mi].len() as u64,
            n_failed: failed[mi],
        });
    }

    let mut out = std::io::BufWriter::new(std::fs::File::create(
        cfg.output_dir.join("results.csv"),
    )?);
    writeln!(
        out,
        "method,alpha_mean,alpha_ci_lo,alpha_ci_hi,beta_mean,beta_ci_lo,beta_ci_hi,alpha_abs_err,beta_abs_err,n_fits,n_failed"
    )?;
    for m in &methods {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            m.method,
            m.alpha_mean,
            m.alpha_ci.0,
            m.alpha_ci.1,
            m.beta_mean,
            m.beta_ci.0,
            m.beta_ci.1,
            m.alpha_abs_err,
            m.beta_abs_err,
            m.n_fits,
            m.n_failed
        )?;
    }
    let ref_params = reference.params;
    writeln!(
        out,
        "{},{},{},{},{},{},{},0,0,1,0",
        cfg.reference_fit.record_name(),
        ref_params.alpha(),
        ref_params.alpha(),
        ref_params.alpha(),
        ref_params.beta(),
        ref_params.beta(),
        ref_params.beta()
    )?;
    out.flush()?;
    drop(out);

    let file = std::fs::File::create(cfg.output_dir.join("fits.json"))?;
    let mut json_out = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut json_out, &records)?;
    writeln!(json_out)?;
    drop(json_out);

    Ok(ReplaySummary { reference: ref_params, budget, methods })
}

// ---------------------------------------------------------------------------
// Calibration

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSummary {
    /// Gold-standard counts pooled over all replicates.
    pub outcome: GoldStandardOutcome,
    pub priors: DecisionPriors,
}

/// Replays the dataset per replicate, tallies gold-standard decision
/// outcomes, pools the counts, and calibrates the decided priors from them.
/// The undecided prior is taken from `cfg.priors.zero`.
///
/// Emits `priors.json` in the same format the `--priors` flag accepts, and
/// `results.csv` with the pooled counts.
pub fn run_calibrate(cfg: &ExperimentConfig) -> Result<CalibrationSummary> {
    cfg.validate_common()?;
    let completion = cfg.completion()?;
    let Some(dataset) = &cfg.dataset else {
        return Err(Error::InvalidConfig("calibration needs a dataset".into()));
    };
    let Some(gold_path) = &cfg.gold else {
        return Err(Error::InvalidConfig("calibration needs a gold-standard file".into()));
    };
    let (instance, desc) = load_dataset(dataset, DatasetFormat::from_path(dataset), None)?;
    let gold = load_gold(gold_path)?;
    let mut gold_indices = Vec::with_capacity(gold.len());
    for (task_id, label) in &gold {
        let Some(index) = desc.task_index(task_id) else {
            return Err(Error::InvalidInput(format!(
                "gold task {task_id:?} does not appear in the dataset"
            )));
        };
        gold_indices.push((index, *label));
    }
    let budget = replay_budget(cfg, &desc)?;
    cfg.write_config()?;

    let mut outcome = GoldStandardOutcome::default();
    for r in 0..cfg.replicates {
        let seed = replicate_seed(cfg.seed, r);
        let shuffled = instance.shuffled_pools(seed);
        let trace = run_allocation(&shuffled, budget, &completion, cfg.policy, seed)?;
        let pairs: Vec<(TaskState, u8)> = gold_indices
            .iter()
            .map(|&(index, label)| (trace.final_states[index], label))
            .collect();
        outcome = outcome.merge(&GoldStandardOutcome::from_decisions(&pairs)?);
    }

    let priors = calibrate_priors_with(&outcome, cfg.count_smoothing, cfg.priors.zero)?;

    let file = std::fs::File::create(cfg.output_dir.join("priors.json"))?;
    let mut json_out = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut json_out, &priors)?;
    writeln!(json_out)?;
    drop(json_out);

    let mut out = std::io::BufWriter::new(std::fs::File::create(
        cfg.output_dir.join("results.csv"),
    )?);
    writeln!(out, "n0,n1,m00,m01,m10,m11")?;
    writeln!(
        out,
        "{},{},{},{},{},{}",
        outcome.n0, outcome.n1, outcome.m00, outcome.m01, outcome.m10, outcome.m11
    )?;
    out.flush()?;
    drop(out);

    Ok(CalibrationSummary { outcome, priors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::export_dataset;
    use crate::model::{sample_response, PooledResponse};

    fn tiny_bias_cfg(dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::bias_demo(dir);
        cfg.n_tasks = 120;
        cfg.budget = 1200;
        cfg.replicates = 4;
        cfg
    }

    #[test]
    fn bias_demo_emits_all_series_and_finds_the_pileups() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_bias_cfg(dir.path());
        let summary = run_bias_demo(&cfg).unwrap();
        assert_eq!(summary.n_completed + summary.n_undecided, 4 * 120);
        assert!(summary.completed_phat_lower_mode < 0.5);
        assert!(summary.completed_phat_upper_mode > 0.5);
        let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert!(text.starts_with("series,bin_lo,bin_hi,count\n"));
        assert_eq!(text.lines().count(), 1 + 4 * 20, "four series of twenty bins");
        assert!(dir.path().join("config.json").exists());
    }

    #[test]
    fn bias_demo_is_deterministic() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let s1 = run_bias_demo(&tiny_bias_cfg(d1.path())).unwrap();
        let s2 = run_bias_demo(&tiny_bias_cfg(d2.path())).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(
            std::fs::read(d1.path().join("results.csv")).unwrap(),
            std::fs::read(d2.path().join("results.csv")).unwrap()
        );
    }

    #[test]
    fn greedy_completes_more_tasks_than_the_uniform_control() {
        let dir = tempfile::tempdir().unwrap();
        let mut greedy = tiny_bias_cfg(dir.path());
        greedy.n_tasks = 300;
        greedy.budget = 3000;
        greedy.replicates = 3;
        let mut uniform = greedy.clone();
        uniform.policy = Policy::uniform_random();
        uniform.output_dir = dir.path().join("uniform");
        let g = run_bias_demo(&greedy).unwrap();
        let u = run_bias_demo(&uniform).unwrap();
        println!(
            "greedy completed {} of {}, uniform {} of {}",
            g.n_completed,
            g.n_completed + g.n_undecided,
            u.n_completed,
            u.n_completed + u.n_undecided
        );
        assert_eq!(g.n_completed + g.n_undecided, u.n_completed + u.n_undecided);
        assert!(
            g.n_completed > u.n_completed,
            "greedy should finish more tasks on the same budget: {} vs {}",
            g.n_completed,
            u.n_completed
        );
        // the bias signature itself is shared: both pile completed
        // estimates at the decision boundaries
        assert!(u.completed_phat_lower_mode < 0.5);
        assert!(u.completed_phat_upper_mode > 0.5);
    }

    #[test]
    fn grid_sweep_covers_every_cell_and_counts_failures() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::sweep(dir.path());
        cfg.grid.steps = 2;
        cfg.replicates = 3;
        cfg.n_tasks = 60;
        cfg.budget = 600;
        let summary = run_grid_sweep(&cfg).unwrap();
        assert_eq!(summary.cells.len(), 4);
        let fail_text = std::fs::read_to_string(dir.path().join("failures.csv")).unwrap();
        assert_eq!(fail_text.lines().count(), 1 + 4 * 3, "cells x methods rows");
        for cell in &summary.cells {
            for mi in 0..3 {
                let n = cell.mean_nats[mi].map_or(0, |_| 1);
                assert!(
                    cell.failures[mi] < 3 || n == 0,
                    "mean must be missing only when everything failed"
                );
            }
        }
    }

    #[test]
    fn single_cell_grid_degenerates_to_one_configuration() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::sweep(dir.path());
        cfg.grid = GridSpec { alpha_min: 2.0, alpha_max: 2.0, beta_min: 2.0, beta_max: 2.0, steps: 1 };
        cfg.replicates = 2;
        cfg.n_tasks = 50;
        cfg.budget = 500;
        let summary = run_grid_sweep(&cfg).unwrap();
        assert_eq!(summary.cells.len(), 1);
        assert_eq!(
            (summary.cells[0].alpha_true, summary.cells[0].beta_true),
            (2.0, 2.0)
        );
    }

    #[test]
    fn timeseries_requires_checkpoints_and_emits_curves() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::timeseries(dir.path());
        cfg.checkpoint_fractions.clear();
        assert!(matches!(run_timeseries(&cfg), Err(Error::InvalidConfig(_))));

        cfg.checkpoint_fractions = vec![0.25, 0.5, 1.0];
        cfg.n_tasks = 60;
        cfg.budget = 600;
        cfg.replicates = 3;
        let summary = run_timeseries(&cfg).unwrap();
        assert_eq!(summary.reference, cfg.generating_prior);
        assert_eq!(summary.curves.len(), 3);
        for curve in &summary.curves {
            assert!(!curve.points.is_empty());
            assert!(curve.points.windows(2).all(|w| w[0].budget_used < w[1].budget_used));
        }
        let text = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
        assert!(text.starts_with("budget_used,method,nats\n"));
        let rows: usize = summary.curves.iter().map(|c| c.points.len()).sum();
        assert_eq!(text.lines().count(), 1 + rows);
        assert!(dir.path().join("bands.csv").exists());
    }

    #[test]
    fn timeseries_outputs_are_byte_identical_across_reruns() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let make = |dir: &Path| {
            let mut cfg = ExperimentConfig::timeseries(dir);
            cfg.checkpoint_fractions = vec![0.5, 1.0];
            cfg.n_tasks = 40;
            cfg.budget = 400;
            cfg.replicates = 2;
            run_timeseries(&cfg).unwrap()
        };
        let s1 = make(d1.path());
        let s2 = make(d2.path());
        assert_eq!(s1, s2);
        for name in ["curves.csv", "bands.csv"] {
            assert_eq!(
                std::fs::read(d1.path().join(name)).unwrap(),
                std::fs::read(d2.path().join(name)).unwrap(),
                "{name} must be byte-identical"
            );
        }
    }

    #[test]
    fn threshold_study_reports_all_config_method_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::threshold(dir.path());
        cfg.synthetic_configs = vec![
            BetaParams::new(2.0, 2.0).unwrap(),
            BetaParams::new(1.0, 1.0).unwrap(),
        ];
        cfg.n_tasks = 60;
        cfg.budget = 600;
        cfg.replicates = 3;
        cfg.checkpoint_fractions = vec![0.2, 0.4, 0.6, 0.8, 1.0];
        let summary = run_threshold_study(&cfg).unwrap();
        assert_eq!(summary.rows.len(), 2 * 3);
        for row in &summary.rows {
            assert_eq!(row.n_reached + row.n_censored, 3);
            assert!(row.mean_responses <= 600.0);
        }
        let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + 6);
    }

    #[test]
    fn extreme_thresholds_hit_the_documented_edges() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::threshold(dir.path());
        cfg.synthetic_configs = vec![BetaParams::new(2.0, 2.0).unwrap()];
        cfg.n_tasks = 50;
        cfg.budget = 500;
        cfg.replicates = 2;
        cfg.checkpoint_fractions = vec![0.5, 1.0];
        cfg.threshold_nats = 1e9;
        let all_first = run_threshold_study(&cfg).unwrap();
        for row in &all_first.rows {
            if row.n_reached > 0 {
                assert_eq!(row.mean_responses, 250.0, "{} should cross immediately", row.method);
            }
        }
        cfg.threshold_nats = 0.0;
        cfg.output_dir = dir.path().join("zero");
        let none = run_threshold_study(&cfg).unwrap();
        for row in &none.rows {
            assert_eq!(row.n_reached, 0, "exact zero divergence is unattainable");
            assert_eq!(row.mean_responses, 500.0);
        }
    }

    /// Synthesizes a replay log by simulating workers on known difficulties.
    fn synthesize_dataset(path: &Path, n_tasks: usize, per_task: usize, seed: u64) {
        let prior = BetaParams::new(2.0, 1.5).unwrap();
        let problem = generate_synthetic_problem(n_tasks, prior, seed).unwrap();
        let TaskSource::Synthetic(tasks) = &problem.source else { unreachable!() };
        let mut rng = stage_rng(seed, Stage::Allocation);
        let pools: Vec<Vec<PooledResponse>> = tasks
            .iter()
            .map(|task| {
                (0..per_task)
                    .map(|w| PooledResponse {
                        worker_id: w as u64,
                        label: sample_response(task, &mut rng),
                    })
                    .collect()
            })
            .collect();
        let instance = ProblemInstance {
            source: TaskSource::Replay(pools),
            budget_cap: Some((n_tasks * per_task) as u64 / 2),
        };
        let desc = DatasetDescriptor {
            name: "synthesized".into(),
            path: path.to_path_buf(),
            n_tasks,
            responses_total: (n_tasks * per_task) as u64,
            per_task_counts: vec![per_task as u64; n_tasks],
            task_ids: (0..n_tasks).map(|i| format!("t{i}")).collect(),
            worker_ids: (0..per_task).map(|w| format!("w{w}")).collect(),
        };
        export_dataset(&instance, &desc, path).unwrap();
    }

    #[test]
    fn replay_compares_methods_against_the_full_data_reference() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("log.csv");
        synthesize_dataset(&data, 80, 10, 3);
        let mut cfg = ExperimentConfig::replay(&data, dir.path());
        cfg.replicates = 3;
        let summary = run_replay(&cfg).unwrap();
        assert_eq!(summary.budget, 400);
        assert_eq!(summary.methods.len(), 3);
        for m in &summary.methods {
            assert_eq!(m.n_fits + m.n_failed, 3);
            assert!(m.alpha_ci.0 <= m.alpha_mean && m.alpha_mean <= m.alpha_ci.1);
        }
        let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 + 1, "three methods plus the reference row");
        let records: Vec<FitRecord> = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("fits.json")).unwrap(),
        )
        .unwrap();
        let fit_count: u64 = summary.methods.iter().map(|m| m.n_fits).sum();
        assert_eq!(records.len() as u64, fit_count + 1);
        assert_eq!(records[0].method, "reference-wald-transformed");
    }

    #[test]
    fn replay_rejects_out_of_range_budget_fractions() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("log.csv");
        synthesize_dataset(&data, 20, 6, 5);
        let mut cfg = ExperimentConfig::replay(&data, dir.path());
        cfg.budget_fraction = 0.6;
        assert!(matches!(run_replay(&cfg), Err(Error::InvalidConfig(_))));
        cfg.budget_fraction = 0.0;
        assert!(matches!(run_replay(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn calibrate_pools_outcomes_and_writes_loadable_priors() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("log.csv");
        synthesize_dataset(&data, 60, 10, 7);
        let gold_path = dir.path().join("gold.csv");
        // gold labels: majority vote of the synthesized log itself
        let (instance, desc) =
            load_dataset(&data, DatasetFormat::Csv, None).unwrap();
        let TaskSource::Replay(pools) = &instance.source else { unreachable!() };
        let mut gold_text = String::from("task_id,true_label\n");
        for (i, pool) in pools.iter().enumerate().take(30) {
            let ones = pool.iter().filter(|r| r.label.is_one()).count();
            let label = u8::from(2 * ones >= pool.len());
            gold_text.push_str(&format!("{},{label}\n", desc.task_ids[i]));
        }
        std::fs::write(&gold_path, gold_text).unwrap();

        let mut cfg = ExperimentConfig::calibrate(&data, &gold_path, dir.path());
        cfg.replicates = 4;
        let summary = run_calibrate(&cfg).unwrap();
        assert_eq!(summary.outcome.m00 + summary.outcome.m01, summary.outcome.n0);
        assert_eq!(summary.outcome.m10 + summary.outcome.m11, summary.outcome.n1);
        assert_eq!(summary.priors.neg.alpha(), 1.0);
        assert_eq!(summary.priors.pos.beta(), 1.0);
        let loaded: DecisionPriors = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("priors.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(loaded, summary.priors);
    }

    #[test]
    fn calibrate_rejects_gold_tasks_missing_from_the_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("log.csv");
        synthesize_dataset(&data, 10, 6, 9);
        let gold_path = dir.path().join("gold.csv");
        std::fs::write(&gold_path, "task_id,true_label\nnot-a-task,1\n").unwrap();
        let cfg = ExperimentConfig::calibrate(&data, &gold_path, dir.path());
        assert!(matches!(run_calibrate(&cfg), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn config_json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_bias_cfg(dir.path());
        run_bias_demo(&cfg).unwrap();
        let loaded: ExperimentConfig = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("config.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(loaded.seed, cfg.seed);
        assert_eq!(loaded.n_tasks, cfg.n_tasks);
        assert_eq!(loaded.priors, cfg.priors);
    }
}
