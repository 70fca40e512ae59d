//! Fits a beta distribution to a clean sample of task difficulties with both
//! available methods and compares the fits to the generating distribution.
//!
//! Run with `cargo run --example fit_difficulty`.

use rand::Rng;

use crowd_deps::evaluation::kl_beta_beta;
use crowd_deps::inference::{fit_beta_mle_default, fit_beta_mom};
use crowd_deps::model::BetaParams;
use crowd_deps::rng::{stage_rng, Stage};
use crowd_deps::Result;

fn main() -> Result<()> {
    let truth = BetaParams::new(2.0, 5.0)?;
    let n = 2000;
    let mut rng = stage_rng(42, Stage::Sampling);
    let dist = rand_distr::Beta::new(truth.alpha(), truth.beta()).unwrap();
    let sample: Vec<f64> = (0..n).map(|_| rng.sample(dist)).collect();

    println!("drew {n} difficulties from {truth}");
    for (name, fit) in [
        ("maximum likelihood", fit_beta_mle_default(&sample)?),
        ("method of moments", fit_beta_mom(&sample)?),
    ] {
        let kl = kl_beta_beta(truth, fit.params);
        println!(
            "{name}: {} after {} iterations, divergence from truth {:.5} nats",
            fit.params, fit.iterations, kl.nats
        );
    }
    Ok(())
}
