//! Budget allocation and difficulty-distribution inference for binary
//! crowdsourcing tasks.
//!
//! A fixed budget of worker responses is spent across a set of yes/no tasks.
//! Each task has an unknown difficulty, the probability that a random worker
//! answers 1, and a task completes once the smoothed ratio between its label
//! counts clears a threshold. The library provides:
//!
//! * the task model and synthetic generator ([`model`]),
//! * the greedy response-allocation policy and its uniform-random control
//!   ([`allocation`]),
//! * decision-conditioned posterior sampling and beta fitting to recover the
//!   difficulty distribution from completion-biased counts ([`inference`]),
//! * beta-beta divergence and budget-efficiency curves ([`evaluation`]),
//! * response-log loading and replay ([`dataset`]),
//! * end-to-end experiments with reproducible file output ([`experiments`]).
//!
//! The primary interface is the `examples/` directory, one runnable example
//! per capability:
//!
//! ```text
//! cargo run --example bias_demo          completion bias histograms
//! cargo run --example fit_difficulty    fit a known beta from samples
//! cargo run --example grid_sweep         method comparison across priors
//! cargo run --example budget_timeseries  divergence versus spent budget
//! cargo run --example threshold_study    responses to reach a target fit
//! cargo run --example replay_dataset     replay a recorded response log
//! cargo run --example calibrate_priors   calibrate priors on gold tasks
//! ```
//!
//! The same experiments are scriptable through the thin `crowd-deps` binary
//! (`cargo run -- <experiment> --help`).
//!
//! Everything is deterministic given a seed: reruns of any experiment write
//! byte-identical output files.

pub mod allocation;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod inference;
pub mod model;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
