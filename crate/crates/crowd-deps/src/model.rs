//! Core domain types: binary labels, per-task response counts, task
//! difficulty parameters, and synthetic problem generation.
//!
//! A task's difficulty `p` is the probability a worker answers 1. Workers
//! respond iid given `p`, so a task's observable state is just the pair of
//! label counts `(a, b)` plus the allocator's decision indicator `d`.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stage_rng, Stage};

/// A worker's binary answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Zero,
    One,
}

impl Label {
    pub fn from_u8(v: u8) -> Result<Label> {
        match v {
            0 => Ok(Label::Zero),
            1 => Ok(Label::One),
            other => Err(Error::InvalidInput(format!("non-binary label {other}"))),
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Label::Zero => 0,
            Label::One => 1,
        }
    }

    pub fn is_one(self) -> bool {
        matches!(self, Label::One)
    }
}

/// Running label counts and decision indicator for one task.
///
/// `a` counts 1-labels, `b` counts 0-labels. The decision indicator `d` is
/// -1 (decided zero), 0 (undecided), or +1 (decided one); it is maintained
/// by the allocation loop, not by [`record_response`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TaskState {
    pub a: u64,
    pub b: u64,
    pub d: i8,
}

impl TaskState {
    pub fn new(a: u64, b: u64, d: i8) -> TaskState {
        TaskState { a, b, d }
    }

    /// Total responses received, always `a + b`.
    pub fn n(&self) -> u64 {
        self.a + self.b
    }
}

/// Counts the label into the state. The decision indicator is left alone;
/// decisions are applied by the allocation module.
pub fn record_response(state: TaskState, label: Label) -> TaskState {
    let mut next = state;
    match label {
        Label::One => next.a += 1,
        Label::Zero => next.b += 1,
    }
    next
}

/// Raw maximum-likelihood point estimate `a / n`.
pub fn point_estimate(state: TaskState) -> Result<f64> {
    if state.n() == 0 {
        return Err(Error::UndefinedEstimate(
            "point estimate needs at least one response".into(),
        ));
    }
    Ok(state.a as f64 / state.n() as f64)
}

/// Parameters of a beta distribution; both strictly positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBetaParams")]
pub struct BetaParams {
    alpha: f64,
    beta: f64,
}

#[derive(Deserialize)]
struct RawBetaParams {
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawBetaParams> for BetaParams {
    type Error = Error;

    fn try_from(raw: RawBetaParams) -> Result<BetaParams> {
        BetaParams::new(raw.alpha, raw.beta)
    }
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<BetaParams> {
        if !(alpha.is_finite() && alpha > 0.0 && beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta parameters must be positive and finite, got ({alpha}, {beta})"
            )));
        }
        Ok(BetaParams { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

impl std::fmt::Display for BetaParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Beta({}, {})", self.alpha, self.beta)
    }
}

/// A generated task: its difficulty and its true label.
///
/// The true label follows the difficulty (`z = 1` iff `p > 1/2`); an exact
/// tie at `p = 1/2` is resolved by a seeded fair coin at generation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticTask {
    pub p: f64,
    pub z: Label,
}

/// One recorded response in a replay pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PooledResponse {
    pub worker_id: u64,
    pub label: Label,
}

/// Where a problem's responses come from: simulated Bernoulli draws, or a
/// pre-collected per-task response log revealed in pool order.
#[derive(Debug, Clone)]
pub enum TaskSource {
    Synthetic(Vec<SyntheticTask>),
    Replay(Vec<Vec<PooledResponse>>),
}

/// A set of tasks plus the budget cap that applies to them.
///
/// Synthetic instances have unbounded responses (`budget_cap` is `None`);
/// replay instances cap the budget at a fraction of the recorded responses.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub source: TaskSource,
    pub budget_cap: Option<u64>,
}

impl ProblemInstance {
    pub fn n_tasks(&self) -> usize {
        match &self.source {
            TaskSource::Synthetic(tasks) => tasks.len(),
            TaskSource::Replay(pools) => pools.len(),
        }
    }

    pub fn is_replay(&self) -> bool {
        matches!(self.source, TaskSource::Replay(_))
    }

    /// Total pooled responses (replay mode only).
    pub fn responses_total(&self) -> Option<u64> {
        match &self.source {
            TaskSource::Synthetic(_) => None,
            TaskSource::Replay(pools) => Some(pools.iter().map(|p| p.len() as u64).sum()),
        }
    }

    /// Copy of the instance with every replay pool reshuffled under `seed`.
    /// Synthetic instances are returned unchanged.
    pub fn shuffled_pools(&self, seed: u64) -> ProblemInstance {
        match &self.source {
            TaskSource::Synthetic(_) => self.clone(),
            TaskSource::Replay(pools) => {
                use rand::seq::SliceRandom;
                let mut rng = stage_rng(seed, Stage::Generation);
                let mut shuffled = pools.clone();
                for pool in &mut shuffled {
                    pool.shuffle(&mut rng);
                }
                ProblemInstance {
                    source: TaskSource::Replay(shuffled),
                    budget_cap: self.budget_cap,
                }
            }
        }
    }
}

/// Draws `n_tasks` difficulties iid from `prior` and assigns true labels.
/// Pure function of its arguments: the same seed gives the same instance.
pub fn generate_synthetic_problem(
    n_tasks: usize,
    prior: BetaParams,
    seed: u64,
) -> Result<ProblemInstance> {
    if n_tasks == 0 {
        return Err(Error::InvalidParameter("n_tasks must be at least 1".into()));
    }
    let dist = rand_distr::Beta::new(prior.alpha(), prior.beta())
        .map_err(|e| Error::InvalidParameter(format!("beta sampler rejected {prior}: {e}")))?;
    let mut rng = stage_rng(seed, Stage::Generation);
    let tasks = (0..n_tasks)
        .map(|_| {
            let p: f64 = dist.sample(&mut rng);
            let z = if p > 0.5 {
                Label::One
            } else if p < 0.5 {
                Label::Zero
            } else if rng.gen::<f64>() < 0.5 {
                Label::One
            } else {
                Label::Zero
            };
            SyntheticTask { p, z }
        })
        .collect();
    Ok(ProblemInstance {
        source: TaskSource::Synthetic(tasks),
        budget_cap: None,
    })
}

/// One Bernoulli response: 1 with probability `task.p`, else 0.
pub fn sample_response<R: Rng>(task: &SyntheticTask, rng: &mut R) -> Label {
    if rng.gen::<f64>() < task.p {
        Label::One
    } else {
        Label::Zero
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn record_response_increments_the_matching_count() {
        let s = record_response(TaskState::default(), Label::One);
        assert_eq!((s.a, s.b, s.n()), (1, 0, 1));
        let s = record_response(TaskState::new(2, 3, 0), Label::Zero);
        assert_eq!((s.a, s.b, s.n()), (2, 4, 6));
    }

    #[test]
    fn record_response_is_commutative_in_counts() {
        let s0 = TaskState::new(4, 7, 0);
        let one_then_zero = record_response(record_response(s0, Label::One), Label::Zero);
        let zero_then_one = record_response(record_response(s0, Label::Zero), Label::One);
        assert_eq!(one_then_zero, zero_then_one);
    }

    #[test]
    fn point_estimate_is_the_label_fraction() {
        assert_relative_eq!(point_estimate(TaskState::new(3, 7, 0)).unwrap(), 0.3);
        assert_relative_eq!(point_estimate(TaskState::new(10, 0, 0)).unwrap(), 1.0);
    }

    #[test]
    fn point_estimate_rejects_empty_state() {
        assert!(matches!(
            point_estimate(TaskState::default()),
            Err(Error::UndefinedEstimate(_))
        ));
    }

    #[test]
    fn beta_params_reject_nonpositive_and_nonfinite() {
        assert!(BetaParams::new(0.0, 1.0).is_err());
        assert!(BetaParams::new(1.0, -2.0).is_err());
        assert!(BetaParams::new(f64::NAN, 1.0).is_err());
        assert!(BetaParams::new(1.0, f64::INFINITY).is_err());
        assert!(BetaParams::new(0.5, 3.0).is_ok());
    }

    #[test]
    fn beta_params_deserialization_validates() {
        let ok: BetaParams = serde_json::from_str(r#"{"alpha": 2.0, "beta": 1.0}"#).unwrap();
        assert_eq!((ok.alpha(), ok.beta()), (2.0, 1.0));
        let bad: std::result::Result<BetaParams, _> =
            serde_json::from_str(r#"{"alpha": -1.0, "beta": 1.0}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let prior = BetaParams::new(2.0, 3.0).unwrap();
        let one = generate_synthetic_problem(1, prior, 7).unwrap();
        let two = generate_synthetic_problem(1, prior, 7).unwrap();
        let (TaskSource::Synthetic(a), TaskSource::Synthetic(b)) = (&one.source, &two.source)
        else {
            panic!("synthetic source expected");
        };
        assert_eq!(a[0].p, b[0].p);
        assert_eq!(a[0].z, b[0].z);
    }

    #[test]
    fn generation_rejects_zero_tasks() {
        let prior = BetaParams::new(1.0, 1.0).unwrap();
        assert!(generate_synthetic_problem(0, prior, 1).is_err());
    }

    #[test]
    fn uniform_prior_fills_the_unit_interval() {
        let prior = BetaParams::new(1.0, 1.0).unwrap();
        let problem = generate_synthetic_problem(1000, prior, 11).unwrap();
        let TaskSource::Synthetic(tasks) = &problem.source else {
            panic!("synthetic source expected");
        };
        assert!(tasks.iter().all(|t| (0.0..=1.0).contains(&t.p)));
        let below = tasks.iter().filter(|t| t.p < 0.5).count();
        assert!(
            (350..=650).contains(&below),
            "uniform draws should straddle 1/2, got {below}/1000 below"
        );
    }

    #[test]
    fn generated_mean_matches_the_prior_mean() {
        let prior = BetaParams::new(2.0, 5.0).unwrap();
        let problem = generate_synthetic_problem(100_000, prior, 13).unwrap();
        let TaskSource::Synthetic(tasks) = &problem.source else {
            panic!("synthetic source expected");
        };
        let mean = tasks.iter().map(|t| t.p).sum::<f64>() / tasks.len() as f64;
        assert!(
            (mean - 2.0 / 7.0).abs() < 0.01,
            "sample mean {mean} should be within 0.01 of {}",
            2.0 / 7.0
        );
    }

    #[test]
    fn true_label_follows_the_difficulty() {
        let prior = BetaParams::new(1.0, 1.0).unwrap();
        let problem = generate_synthetic_problem(5000, prior, 17).unwrap();
        let TaskSource::Synthetic(tasks) = &problem.source else {
            panic!("synthetic source expected");
        };
        for t in tasks {
            if t.p > 0.5 {
                assert_eq!(t.z, Label::One);
            } else if t.p < 0.5 {
                assert_eq!(t.z, Label::Zero);
            }
        }
    }

    #[test]
    fn degenerate_bernoulli_is_exact() {
        let mut rng = stage_rng(1, Stage::Allocation);
        let sure_one = SyntheticTask { p: 1.0, z: Label::One };
        let sure_zero = SyntheticTask { p: 0.0, z: Label::Zero };
        for _ in 0..1000 {
            assert_eq!(sample_response(&sure_one, &mut rng), Label::One);
            assert_eq!(sample_response(&sure_zero, &mut rng), Label::Zero);
        }
    }

    #[test]
    fn bernoulli_rate_matches_p() {
        let mut rng = stage_rng(3, Stage::Allocation);
        let task = SyntheticTask { p: 0.7, z: Label::One };
        let ones = (0..100_000)
            .filter(|_| sample_response(&task, &mut rng).is_one())
            .count();
        let rate = ones as f64 / 100_000.0;
        assert!(
            (rate - 0.7).abs() < 0.01,
            "empirical rate {rate} should be within 0.01 of 0.7"
        );
    }

    #[test]
    fn pool_shuffle_is_seeded_and_preserves_contents() {
        let pools = vec![
            (0..20)
                .map(|w| PooledResponse {
                    worker_id: w,
                    label: if w % 3 == 0 { Label::One } else { Label::Zero },
                })
                .collect::<Vec<_>>(),
            vec![PooledResponse { worker_id: 99, label: Label::One }],
        ];
        let instance = ProblemInstance {
            source: TaskSource::Replay(pools.clone()),
            budget_cap: Some(10),
        };
        let s1 = instance.shuffled_pools(5);
        let s2 = instance.shuffled_pools(5);
        let s3 = instance.shuffled_pools(6);
        let (TaskSource::Replay(p1), TaskSource::Replay(p2), TaskSource::Replay(p3)) =
            (&s1.source, &s2.source, &s3.source)
        else {
            panic!("replay source expected");
        };
        assert_eq!(p1, p2, "same seed must give the same order");
        assert_ne!(p1, p3, "different seeds should reorder the 20-item pool");
        let mut sorted = p1[0].clone();
        sorted.sort_by_key(|r| r.worker_id);
        assert_eq!(sorted, pools[0], "shuffling must not alter pool contents");
    }
}
