//! Replays a recorded response log at half its budget and compares each
//! method's fit against the full-data reference.
//!
//! No real dataset ships with the repository, so this example first
//! synthesizes a plausible log (workers answering tasks with known
//! difficulties), writes it as a normalized CSV, and then replays it exactly
//! as a real log would be. Point `replay --dataset` at your own file to skip
//! the synthesis.
//!
//! Run with `cargo run --example replay_dataset`. Results land in
//! `target/example-out/replay-dataset/`.

use std::path::Path;

use crowd_deps::allocation::{
    run_allocation_checkpointed, write_snapshots_csv, write_trace_csv, CompletionConfig,
};
use crowd_deps::dataset::{export_dataset, load_dataset, DatasetDescriptor, DatasetFormat};
use crowd_deps::experiments::{run_replay, ExperimentConfig};
use crowd_deps::model::{
    generate_synthetic_problem, sample_response, BetaParams, PooledResponse, ProblemInstance,
    TaskSource,
};
use crowd_deps::rng::{stage_rng, Stage};
use crowd_deps::Result;

fn synthesize_log(path: &Path, n_tasks: usize, per_task: usize, seed: u64) -> Result<()> {
    let prior = BetaParams::new(2.0, 1.5)?;
    let problem = generate_synthetic_problem(n_tasks, prior, seed)?;
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
        task_ids: (0..n_tasks).map(|i| format!("task-{i:03}")).collect(),
        worker_ids: (0..per_task).map(|w| format!("worker-{w:02}")).collect(),
    };
    export_dataset(&instance, &desc, path)
}

fn main() -> Result<()> {
    let out = Path::new("target/example-out/replay-dataset");
    std::fs::create_dir_all(out)?;
    let log = out.join("synthesized-log.csv");
    synthesize_log(&log, 300, 10, 11)?;
    println!("synthesized a 300-task, 10-responses-per-task log at {}", log.display());

    let mut cfg = ExperimentConfig::replay(&log, out);
    cfg.replicates = 20;
    let summary = run_replay(&cfg)?;

    println!(
        "replayed {} of 3000 responses per replicate; full-data reference {}",
        summary.budget, summary.reference
    );
    for m in &summary.methods {
        println!(
            "  {:>18}: alpha {:.2} [{:.2}, {:.2}], beta {:.2} [{:.2}, {:.2}] ({} failed)",
            m.method.to_string(),
            m.alpha_mean,
            m.alpha_ci.0,
            m.alpha_ci.1,
            m.beta_mean,
            m.beta_ci.0,
            m.beta_ci.1,
            m.n_failed
        );
    }
    println!("per-fit records in {}", out.join("fits.json").display());

    // export the full step log and checkpoint snapshots of one replicate
    let (instance, _) = load_dataset(&log, DatasetFormat::Csv, None)?;
    let shuffled = instance.shuffled_pools(cfg.seed);
    let checkpoints: Vec<u64> = (1..=4).map(|i| i * summary.budget / 4).collect();
    let trace = run_allocation_checkpointed(
        &shuffled,
        summary.budget,
        &CompletionConfig::new(cfg.c_ratio, cfg.smoothing)?,
        cfg.policy,
        cfg.seed,
        &checkpoints,
    )?;
    write_trace_csv(&trace, &out.join("trace.csv"))?;
    write_snapshots_csv(&trace, &out.join("snapshots.csv"))?;
    println!(
        "one replicate's {}-step trace and {} snapshots in {} and {}",
        trace.steps.len(),
        trace.snapshots.len(),
        out.join("trace.csv").display(),
        out.join("snapshots.csv").display()
    );
    Ok(())
}
