//! Traces how each method's divergence from the generating distribution
//! shrinks as the response budget is spent.
//!
//! Run with `cargo run --example budget_timeseries`. Results land in
//! `target/example-out/budget-timeseries/`.

use std::path::Path;

use crowd_deps::experiments::{run_timeseries, ExperimentConfig};
use crowd_deps::Result;

fn main() -> Result<()> {
    let out = Path::new("target/example-out/budget-timeseries");
    let mut cfg = ExperimentConfig::timeseries(out);
    cfg.replicates = 20;
    cfg.checkpoint_fractions = (1..=10).map(|i| i as f64 * 0.1).collect();

    println!(
        "tracing divergence to {} at {} checkpoints over a budget of {}",
        cfg.generating_prior,
        cfg.checkpoint_fractions.len(),
        cfg.budget
    );
    let summary = run_timeseries(&cfg)?;

    for curve in &summary.curves {
        print!("{:>18}:", curve.method.to_string());
        for p in &curve.points {
            print!(" {:.2}", p.nats);
        }
        println!();
    }
    println!(
        "curves and bootstrap bands written to {} and {}",
        out.join("curves.csv").display(),
        out.join("bands.csv").display()
    );
    Ok(())
}
