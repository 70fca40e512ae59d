//! Measures how many responses each method needs before its fit comes
//! within a fixed divergence of the generating distribution.
//!
//! Run with `cargo run --example threshold_study`. Results land in
//! `target/example-out/threshold-study/`.

use std::path::Path;

use crowd_deps::experiments::{run_threshold_study, ExperimentConfig};
use crowd_deps::Result;

fn main() -> Result<()> {
    let out = Path::new("target/example-out/threshold-study");
    let mut cfg = ExperimentConfig::threshold(out);
    cfg.replicates = 20;

    println!(
        "measuring responses to reach {} nats for {} generating distributions",
        cfg.threshold_nats,
        cfg.synthetic_configs.len()
    );
    let summary = run_threshold_study(&cfg)?;

    for row in &summary.rows {
        println!(
            "  Beta({}, {}) {:>18}: mean {:>5.0} responses ({} of {} reached)",
            row.alpha_true,
            row.beta_true,
            row.method.to_string(),
            row.mean_responses,
            row.n_reached,
            row.n_reached + row.n_censored
        );
    }
    println!("full table in {}", out.join("results.csv").display());
    Ok(())
}
