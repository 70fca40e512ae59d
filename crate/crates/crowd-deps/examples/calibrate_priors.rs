//! Calibrates the decided-task priors from gold-standard labels: replay a
//! log, compare each decided gold task's decision with its true label, and
//! turn the error rates into prior exponents.
//!
//! Like `replay_dataset`, this example synthesizes its own log and gold file
//! first. Run with `cargo run --example calibrate_priors`. Results land in
//! `target/example-out/calibrate-priors/`.

use std::path::Path;

use crowd_deps::dataset::{export_dataset, DatasetDescriptor};
use crowd_deps::experiments::{run_calibrate, ExperimentConfig};
use crowd_deps::model::{
    generate_synthetic_problem, sample_response, BetaParams, PooledResponse, ProblemInstance,
    TaskSource,
};
use crowd_deps::rng::{stage_rng, Stage};
use crowd_deps::Result;

fn synthesize(path: &Path, gold_path: &Path, n_tasks: usize, per_task: usize, seed: u64) -> Result<()> {
    let prior = BetaParams::new(2.0, 2.0)?;
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
    export_dataset(&instance, &desc, path)?;

    // the generator knows every true label, so gold is exact here
    let mut gold = String::from("task_id,true_label\n");
    for (i, task) in tasks.iter().enumerate().take(n_tasks / 2) {
        gold.push_str(&format!("task-{i:03},{}\n", task.z.as_u8()));
    }
    std::fs::write(gold_path, gold)?;
    Ok(())
}

fn main() -> Result<()> {
    let out = Path::new("target/example-out/calibrate-priors");
    std::fs::create_dir_all(out)?;
    let log = out.join("synthesized-log.csv");
    let gold = out.join("gold.csv");
    synthesize(&log, &gold, 400, 10, 23)?;
    println!(
        "synthesized a 400-task log at {} with gold labels for 200 tasks",
        log.display()
    );

    let mut cfg = ExperimentConfig::calibrate(&log, &gold, out);
    cfg.replicates = 20;
    let summary = run_calibrate(&cfg)?;

    let o = &summary.outcome;
    println!(
        "pooled over replicates: {} decided-0 gold tasks ({} wrong), {} decided-1 ({} wrong)",
        o.n0, o.m01, o.n1, o.m10
    );
    println!(
        "calibrated priors: negative {}, undecided {}, positive {}",
        summary.priors.neg, summary.priors.zero, summary.priors.pos
    );
    println!(
        "ready to pass back in via --priors: {}",
        out.join("priors.json").display()
    );
    Ok(())
}
