//! Difficulty-distribution inference.
//!
//! The debiased pipeline conditions each task's beta prior on the
//! allocator's decision, samples one difficulty value per task from the
//! resulting conjugate posterior, and fits a beta distribution to the
//! sample by maximum likelihood or the method of moments. Gold-standard
//! tasks calibrate the decided priors. The Wald baselines skip the
//! debiasing and fit per-task point estimates directly.

use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BetaParams, TaskState};
use crate::rng::{stage_rng, Stage};
use crate::special::{digamma, ln_gamma, trigamma};

/// Beta priors on task difficulty, one per decision outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionPriors {
    /// Prior for decided-zero tasks (d = -1).
    pub neg: BetaParams,
    /// Prior for undecided tasks (d = 0).
    pub zero: BetaParams,
    /// Prior for decided-one tasks (d = +1).
    pub pos: BetaParams,
}

impl DecisionPriors {
    pub fn new(neg: BetaParams, zero: BetaParams, pos: BetaParams) -> DecisionPriors {
        DecisionPriors { neg, zero, pos }
    }

    /// Priors used for the real-dataset experiments: (1,2), (2,2), (2,1).
    pub fn real_data() -> DecisionPriors {
        DecisionPriors {
            neg: BetaParams::new(1.0, 2.0).unwrap(),
            zero: BetaParams::new(2.0, 2.0).unwrap(),
            pos: BetaParams::new(2.0, 1.0).unwrap(),
        }
    }

    /// More confident priors used for the synthetic experiments:
    /// (1,5), (5,5), (5,1).
    pub fn synthetic() -> DecisionPriors {
        DecisionPriors {
            neg: BetaParams::new(1.0, 5.0).unwrap(),
            zero: BetaParams::new(5.0, 5.0).unwrap(),
            pos: BetaParams::new(5.0, 1.0).unwrap(),
        }
    }

    pub fn for_decision(&self, d: i8) -> BetaParams {
        match d.signum() {
            -1 => self.neg,
            0 => self.zero,
            _ => self.pos,
        }
    }
}

/// One debiased difficulty draw per task.
#[derive(Debug, Clone, PartialEq)]
pub struct DebiasedSample {
    pub values: Vec<f64>,
    pub seed: u64,
}

/// Which fitter produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Mle,
    Mom,
}

impl std::fmt::Display for FitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitMethod::Mle => write!(f, "mle"),
            FitMethod::Mom => write!(f, "mom"),
        }
    }
}

/// A fitted beta distribution plus how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub params: BetaParams,
    pub method: FitMethod,
    /// Newton iterations used (0 for method-of-moments fits).
    pub iterations: u64,
    pub converged: bool,
    pub n_samples: u64,
}

/// Conjugate posterior of a task's difficulty: the decision's prior plus the
/// observed counts, `Beta(a + alpha_d, b + beta_d)`.
pub fn posterior_params(state: TaskState, priors: &DecisionPriors) -> BetaParams {
    let prior = priors.for_decision(state.d);
    BetaParams::new(state.a as f64 + prior.alpha(), state.b as f64 + prior.beta())
        .expect("counts are nonnegative and priors are valid")
}

/// Draws `samples_per_task` values from every task's posterior and pools
/// them. With the default of one draw per task the result has exactly one
/// debiased difficulty value per task. Deterministic given the seed.
pub fn sample_debiased(
    states: &[TaskState],
    priors: &DecisionPriors,
    samples_per_task: u64,
    seed: u64,
) -> Result<DebiasedSample> {
    if samples_per_task == 0 {
        return Err(Error::InvalidParameter("samples_per_task must be at least 1".into()));
    }
    let mut rng = stage_rng(seed, Stage::Sampling);
    let mut values = Vec::with_capacity(states.len() * samples_per_task as usize);
    for &state in states {
        let post = posterior_params(state, priors);
        let dist = rand_distr::Beta::new(post.alpha(), post.beta())
            .map_err(|e| Error::InvalidParameter(format!("beta sampler rejected {post}: {e}")))?;
        for _ in 0..samples_per_task {
            values.push(dist.sample(&mut rng));
        }
    }
    Ok(DebiasedSample { values, seed })
}

/// Beta log-likelihood of a sample, up to no additive constant.
pub fn beta_log_likelihood(sample: &[f64], params: BetaParams) -> f64 {
    let n = sample.len() as f64;
    let sum_ln: f64 = sample.iter().map(|p| p.ln()).sum();
    let sum_ln1m: f64 = sample.iter().map(|p| (1.0 - p).ln()).sum();
    let (a, b) = (params.alpha(), params.beta());
    (a - 1.0) * sum_ln + (b - 1.0) * sum_ln1m
        - n * (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b))
}

const MLE_DEFAULT_TOLERANCE: f64 = 1e-10;
const MLE_DEFAULT_MAX_ITERS: u64 = 500;
const PARAM_CLAMP: (f64, f64) = (1e-6, 1e6);

/// Maximum-likelihood beta fit via damped Newton iteration on the score
/// equations, started from the method-of-moments estimate.
///
/// The convergence test is on the norm of the per-observation (mean-scaled)
/// score residuals, so the tolerance means the same thing at every sample
/// size. Parameters are clamped to `[1e-6, 1e6]`. On hitting `max_iters`
/// the best iterate is returned with `converged = false`.
pub fn fit_beta_mle(sample: &[f64], tolerance: f64, max_iters: u64) -> Result<FitResult> {
    if sample.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "maximum-likelihood fit needs at least 2 values, got {}",
            sample.len()
        )));
    }
    if let Some(bad) = sample.iter().find(|p| !(0.0 < **p && **p < 1.0)) {
        return Err(Error::InvalidInput(format!(
            "maximum-likelihood fit needs values strictly inside (0,1), got {bad}"
        )));
    }
    if sample.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput(
            "maximum-likelihood fit needs at least two distinct values".into(),
        ));
    }

    let n = sample.len() as f64;
    let mean_ln = sample.iter().map(|p| p.ln()).sum::<f64>() / n;
    let mean_ln1m = sample.iter().map(|p| (1.0 - p).ln()).sum::<f64>() / n;

    let (mut a, mut b) = match fit_beta_mom(sample) {
        Ok(fit) => (fit.params.alpha(), fit.params.beta()),
        Err(_) => (1.0, 1.0),
    };
    let clamp = |v: f64| v.clamp(PARAM_CLAMP.0, PARAM_CLAMP.1);
    a = clamp(a);
    b = clamp(b);

    let residuals = |a: f64, b: f64| {
        let common = digamma(a + b);
        (mean_ln - (digamma(a) - common), mean_ln1m - (digamma(b) - common))
    };

    let (mut r1, mut r2) = residuals(a, b);
    let mut iterations = 0;
    let mut converged = (r1 * r1 + r2 * r2).sqrt() <= tolerance;
    while !converged && iterations < max_iters {
        iterations += 1;
        let tri_ab = trigamma(a + b);
        // Jacobian of the residuals in (a, b)
        let j11 = -(trigamma(a) - tri_ab);
        let j22 = -(trigamma(b) - tri_ab);
        let j12 = tri_ab;
        let det = j11 * j22 - j12 * j12;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let step_a = (-r1 * j22 + r2 * j12) / det;
        let step_b = (-r2 * j11 + r1 * j12) / det;

        let norm_before = (r1 * r1 + r2 * r2).sqrt();
        let mut damping = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let na = clamp(a + damping * step_a);
            let nb = clamp(b + damping * step_b);
            let (nr1, nr2) = residuals(na, nb);
            let norm_after = (nr1 * nr1 + nr2 * nr2).sqrt();
            if norm_after < norm_before {
                a = na;
                b = nb;
                r1 = nr1;
                r2 = nr2;
                accepted = true;
                break;
            }
            damping *= 0.5;
        }
        if !accepted {
            break;
        }
        converged = (r1 * r1 + r2 * r2).sqrt() <= tolerance;
    }

    Ok(FitResult {
        params: BetaParams::new(a, b)?,
        method: FitMethod::Mle,
        iterations,
        converged,
        n_samples: sample.len() as u64,
    })
}

/// [`fit_beta_mle`] with the standard tolerance (1e-10) and iteration cap (500).
pub fn fit_beta_mle_default(sample: &[f64]) -> Result<FitResult> {
    fit_beta_mle(sample, MLE_DEFAULT_TOLERANCE, MLE_DEFAULT_MAX_ITERS)
}

/// Method-of-moments beta fit: with sample mean `m` and unbiased sample
/// variance `s2`, `k = m(1-m)/s2 - 1`, returning `(mk, (1-m)k)`.
pub fn fit_beta_mom(sample: &[f64]) -> Result<FitResult> {
    if sample.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "method-of-moments fit needs at least 2 values, got {}",
            sample.len()
        )));
    }
    if sample.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::DegenerateSample(
            "method-of-moments fit needs nonzero sample variance".into(),
        ));
    }
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let s2 = sample.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1.0);
    let bound = mean * (1.0 - mean);
    if s2 >= bound {
        return Err(Error::MomentInfeasible(format!(
            "sample variance {s2} is not below mean(1-mean) = {bound}; no beta matches these moments"
        )));
    }
    let k = bound / s2 - 1.0;
    Ok(FitResult {
        params: BetaParams::new(mean * k, (1.0 - mean) * k)?,
        method: FitMethod::Mom,
        iterations: 0,
        converged: true,
        n_samples: sample.len() as u64,
    })
}

/// Gold-standard outcome counts after an allocation run.
///
/// Only decided gold tasks are counted: `n0`/`n1` are the decided gold tasks
/// with true label 0/1, `m00`/`m01` split `n0` by decision sign (-1 / +1),
/// and `m11`/`m10` split `n1` (+1 / -1). Undecided gold tasks carry no
/// decision information and are ignored entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GoldStandardOutcome {
    pub n0: u64,
    pub n1: u64,
    pub m00: u64,
    pub m01: u64,
    pub m10: u64,
    pub m11: u64,
}

impl GoldStandardOutcome {
    /// Tallies decided gold tasks from `(state, true_label)` pairs, where
    /// `true_label` is 0 or 1.
    pub fn from_decisions(gold: &[(TaskState, u8)]) -> Result<GoldStandardOutcome> {
        let mut out = GoldStandardOutcome::default();
        for &(state, z) in gold {
            if z > 1 {
                return Err(Error::InvalidInput(format!("non-binary gold label {z}")));
            }
            match (z, state.d.signum()) {
                (_, 0) => {}
                (0, -1) => {
                    out.n0 += 1;
                    out.m00 += 1;
                }
                (0, _) => {
                    out.n0 += 1;
                    out.m01 += 1;
                }
                (1, 1) => {
                    out.n1 += 1;
                    out.m11 += 1;
                }
                (1, _) => {
                    out.n1 += 1;
                    out.m10 += 1;
                }
                _ => unreachable!(),
            }
        }
        Ok(out)
    }

    /// Pools counts from several runs.
    pub fn merge(&self, other: &GoldStandardOutcome) -> GoldStandardOutcome {
        GoldStandardOutcome {
            n0: self.n0 + other.n0,
            n1: self.n1 + other.n1,
            m00: self.m00 + other.m00,
            m01: self.m01 + other.m01,
            m10: self.m10 + other.m10,
            m11: self.m11 + other.m11,
        }
    }
}

/// How zero cells in the gold-standard counts are handled before taking
/// logarithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountSmoothing {
    /// Add one to both cells of a group only when that group has a zero
    /// cell. Zero-free counts are used exactly as observed.
    AddOneIfZero,
    /// Always add one to every cell.
    AddOneAlways,
    /// Use raw counts; errors when a group has a zero cell.
    Raw,
}

/// Calibrates the decided priors from gold-standard outcomes with the
/// default smoothing ([`CountSmoothing::AddOneIfZero`]) and an undecided
/// prior of Beta(2,2).
pub fn calibrate_priors(gold: &GoldStandardOutcome) -> Result<DecisionPriors> {
    calibrate_priors_with(
        gold,
        CountSmoothing::AddOneIfZero,
        BetaParams::new(2.0, 2.0).unwrap(),
    )
}

/// Calibrates `neg = (1, log2(n0/m01))` and `pos = (log2(n1/m10), 1)` so the
/// decided priors put mass exactly `m00/n0` on `[0, 1/2]` (and mirrored for
/// `m11/n1`), via the identity `I_{1/2}(1, b) = 1 - (1/2)^b`. The undecided
/// prior is not calibrated; it is set to `zero_prior`.
pub fn calibrate_priors_with(
    gold: &GoldStandardOutcome,
    smoothing: CountSmoothing,
    zero_prior: BetaParams,
) -> Result<DecisionPriors> {
    let neg_b = calibrated_exponent(gold.n0, gold.m00, gold.m01, smoothing, "d=-1")?;
    let pos_a = calibrated_exponent(gold.n1, gold.m11, gold.m10, smoothing, "d=+1")?;
    Ok(DecisionPriors {
        neg: BetaParams::new(1.0, neg_b)?,
        zero: zero_prior,
        pos: BetaParams::new(pos_a, 1.0)?,
    })
}

/// log2(n / wrong) for one decision group, where `right` is the count of
/// decisions agreeing with the gold label and `wrong` the count disagreeing.
fn calibrated_exponent(
    n: u64,
    right: u64,
    wrong: u64,
    smoothing: CountSmoothing,
    group: &str,
) -> Result<f64> {
    debug_assert_eq!(n, right + wrong, "group counts must partition n");
    let (n, wrong) = match smoothing {
        CountSmoothing::AddOneAlways => (n + 2, wrong + 1),
        CountSmoothing::AddOneIfZero if right == 0 || wrong == 0 => (n + 2, wrong + 1),
        CountSmoothing::AddOneIfZero => (n, wrong),
        CountSmoothing::Raw => {
            if wrong == 0 || right == 0 {
                return Err(Error::CalibrationUndefined(format!(
                    "group {group} has a zero count (right={right}, wrong={wrong}) and smoothing is disabled"
                )));
            }
            (n, wrong)
        }
    };
    Ok((n as f64 / wrong as f64).log2())
}

/// Which point-estimate variant feeds the Wald baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaldVariant {
    /// `(a + eps) / (n + 2 eps)`, defined for every task.
    Smoothed,
    /// `(p_hat (N-1) + 1/2) / N` applied to the raw `p_hat = a/n`; tasks
    /// with no responses are excluded with a logged warning.
    Transformed,
}

/// Per-task point estimates for the Wald baseline. `n_tasks` is the N used
/// by the transformed variant's rescaling.
pub fn wald_estimates(
    states: &[TaskState],
    variant: WaldVariant,
    epsilon: f64,
    n_tasks: usize,
) -> Result<Vec<f64>> {
    match variant {
        WaldVariant::Smoothed => {
            if !(epsilon.is_finite() && epsilon > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "smoothing pseudo-count must be positive, got {epsilon}"
                )));
            }
            Ok(states
                .iter()
                .map(|s| (s.a as f64 + epsilon) / (s.n() as f64 + 2.0 * epsilon))
                .collect())
        }
        WaldVariant::Transformed => {
            if n_tasks == 0 {
                return Err(Error::InvalidParameter(
                    "transformed estimates need n_tasks >= 1".into(),
                ));
            }
            let n_big = n_tasks as f64;
            let skipped = states.iter().filter(|s| s.n() == 0).count();
            if skipped > 0 {
                log::warn!(
                    "transformed estimates exclude {skipped} task(s) with no responses"
                );
            }
            Ok(states
                .iter()
                .filter(|s| s.n() > 0)
                .map(|s| {
                    let raw = s.a as f64 / s.n() as f64;
                    (raw * (n_big - 1.0) + 0.5) / n_big
                })
                .collect())
        }
    }
}

/// Fits the Wald baseline: smoothed estimates by maximum likelihood,
/// transformed estimates by the method of moments.
pub fn fit_wald(states: &[TaskState], variant: WaldVariant, n_tasks: usize) -> Result<FitResult> {
    let estimates = wald_estimates(states, variant, 1.0, n_tasks)?;
    match variant {
        WaldVariant::Smoothed => fit_beta_mle_default(&estimates),
        WaldVariant::Transformed => fit_beta_mom(&estimates),
    }
}

/// The debiased pipeline: decision-conditioned posteriors, one sampled
/// difficulty per task, then a beta fit by the requested method.
pub fn deps_pipeline(
    states: &[TaskState],
    priors: &DecisionPriors,
    fit_method: FitMethod,
    seed: u64,
) -> Result<FitResult> {
    let sample = sample_debiased(states, priors, 1, seed)?;
    match fit_method {
        FitMethod::Mle => fit_beta_mle_default(&sample.values),
        FitMethod::Mom => fit_beta_mom(&sample.values),
    }
}
