//! Shows how ratio-based completion skews which tasks finish and what their
//! estimates look like: completed tasks pile up at the decision boundaries
//! and tasks near difficulty 1/2 rarely complete at all.
//!
//! Run with `cargo run --example bias_demo`. Results land in
//! `target/example-out/bias-demo/`.

use std::path::Path;

use crowd_deps::experiments::{run_bias_demo, ExperimentConfig};
use crowd_deps::Result;

fn main() -> Result<()> {
    let out = Path::new("target/example-out/bias-demo");
    let mut cfg = ExperimentConfig::bias_demo(out);
    cfg.replicates = 20;

    println!(
        "allocating {} responses across {} uniform-difficulty tasks, {} replicates",
        cfg.budget, cfg.n_tasks, cfg.replicates
    );
    let summary = run_bias_demo(&cfg)?;

    println!(
        "completed {} tasks, {} still undecided",
        summary.n_completed, summary.n_undecided
    );
    println!(
        "completed-task estimates pile up near {:.3} and {:.3}",
        summary.completed_phat_lower_mode, summary.completed_phat_upper_mode
    );
    println!(
        "undecided estimates concentrate near {:.3}",
        summary.undecided_phat_mode
    );
    println!(
        "among completed tasks, true difficulties near 1/2 carry only {:.2}x \
         the density of difficulties near 0.1",
        summary.completed_true_density_ratio
    );
    println!("histograms written to {}", out.join("results.csv").display());
    Ok(())
}
