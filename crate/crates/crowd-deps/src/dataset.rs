//! Response-log ingestion for replay mode.
//!
//! The normalized input format is a delimited file with header
//! `task_id,worker_id,label`, one row per recorded response. Task and worker
//! ids may be arbitrary strings; they are mapped to dense indices in order
//! of first appearance. The replay budget cap defaults to half the recorded
//! responses.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Label, PooledResponse, ProblemInstance, TaskSource};

/// Delimiter convention of a response log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Csv,
    Tsv,
}

impl DatasetFormat {
    fn delimiter(self) -> u8 {
        match self {
            DatasetFormat::Csv => b',',
            DatasetFormat::Tsv => b'\t',
        }
    }

    /// Guesses from the file extension; defaults to CSV.
    pub fn from_path(path: &Path) -> DatasetFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => DatasetFormat::Tsv,
            _ => DatasetFormat::Csv,
        }
    }
}

/// Summary of a loaded response log, including the dense-id mappings needed
/// to relate outputs back to the original identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetDescriptor {
    pub name: String,
    pub path: PathBuf,
    pub n_tasks: usize,
    pub responses_total: u64,
    pub per_task_counts: Vec<u64>,
    /// Original task ids, indexed by dense task index.
    pub task_ids: Vec<String>,
    /// Original worker ids, indexed by dense worker index.
    pub worker_ids: Vec<String>,
}

impl DatasetDescriptor {
    /// Dense index of an original task id.
    pub fn task_index(&self, task_id: &str) -> Option<usize> {
        self.task_ids.iter().position(|t| t == task_id)
    }
}

/// Loads a response log into a replay instance.
///
/// Pools keep file order per task; when `shuffle_seed` is given each pool is
/// reshuffled under that seed (the usual convention for re-running
/// allocation against a pre-collected log). The budget cap is
/// `floor(0.5 * responses_total)`.
pub fn load_dataset(
    path: &Path,
    format: DatasetFormat,
    shuffle_seed: Option<u64>,
) -> Result<(ProblemInstance, DatasetDescriptor)> {
    let display_path = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    let header_fields: Vec<String> =
        headers.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    if header_fields != ["task_id", "worker_id", "label"] {
        return Err(Error::Parse {
            path: display_path,
            line: 1,
            message: format!(
                "expected header task_id,worker_id,label, got {}",
                header_fields.join(",")
            ),
        });
    }

    let mut task_index: HashMap<String, usize> = HashMap::new();
    let mut worker_index: HashMap<String, u64> = HashMap::new();
    let mut task_ids = Vec::new();
    let mut worker_ids = Vec::new();
    let mut pools: Vec<Vec<PooledResponse>> = Vec::new();
    let mut seen_pairs: std::collections::HashSet<(usize, u64)> = std::collections::HashSet::new();

    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(Error::Parse {
                path: display_path,
                line,
                message: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let (task, worker, label_text) = (&record[0], &record[1], &record[2]);
        if task.is_empty() || worker.is_empty() {
            return Err(Error::Parse {
                path: display_path,
                line,
                message: "empty task_id or worker_id".into(),
            });
        }
        let label_value: u8 = label_text.parse().map_err(|_| Error::Parse {
            path: display_path.clone(),
            line,
            message: format!("label {label_text:?} is not an integer"),
        })?;
        let label = Label::from_u8(label_value).map_err(|_| {
            Error::InvalidInput(format!(
                "{display_path}:{line}: non-binary label {label_value}"
            ))
        })?;

        let ti = *task_index.entry(task.to_string()).or_insert_with(|| {
            task_ids.push(task.to_string());
            pools.push(Vec::new());
            task_ids.len() - 1
        });
        let wi = *worker_index.entry(worker.to_string()).or_insert_with(|| {
            worker_ids.push(worker.to_string());
            worker_ids.len() as u64 - 1
        });
        if !seen_pairs.insert((ti, wi)) {
            return Err(Error::InvalidInput(format!(
                "{display_path}:{line}: duplicate response for task {task:?} by worker {worker:?}"
            )));
        }
        pools[ti].push(PooledResponse { worker_id: wi, label });
    }

    if pools.is_empty() {
        return Err(Error::InvalidInput(format!("{display_path}: empty dataset")));
    }

    let per_task_counts: Vec<u64> = pools.iter().map(|p| p.len() as u64).collect();
    let responses_total: u64 = per_task_counts.iter().sum();
    let descriptor = DatasetDescriptor {
        name: path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("dataset")
            .to_string(),
        path: path.to_path_buf(),
        n_tasks: pools.len(),
        responses_total,
        per_task_counts,
        task_ids,
        worker_ids,
    };
    let instance = ProblemInstance {
        source: TaskSource::Replay(pools),
        budget_cap: Some(responses_total / 2),
    };
    let instance = match shuffle_seed {
        Some(seed) => instance.shuffled_pools(seed),
        None => instance,
    };
    Ok((instance, descriptor))
}

/// Writes a replay instance back to the normalized CSV format, in pool
/// order, using the descriptor's original identifiers.
pub fn export_dataset(
    instance: &ProblemInstance,
    descriptor: &DatasetDescriptor,
    path: &Path,
) -> Result<()> {
    let TaskSource::Replay(pools) = &instance.source else {
        return Err(Error::InvalidInput("only replay instances can be exported".into()));
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "task_id,worker_id,label")?;
    for (ti, pool) in pools.iter().enumerate() {
        for r in pool {
            writeln!(
                out,
                "{},{},{}",
                descriptor.task_ids[ti],
                descriptor.worker_ids[r.worker_id as usize],
                r.label.as_u8()
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Loads a gold-standard file (`task_id,true_label`) keyed by original task
/// id.
pub fn load_gold(path: &Path) -> Result<Vec<(String, u8)>> {
    let display_path = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let header_fields: Vec<String> =
        reader.headers()?.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    if header_fields != ["task_id", "true_label"] {
        return Err(Error::Parse {
            path: display_path,
            line: 1,
            message: format!(
                "expected header task_id,true_label, got {}",
                header_fields.join(",")
            ),
        });
    }
    let mut gold = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(Error::Parse {
                path: display_path,
                line,
                message: format!("expected 2 fields, got {}", record.len()),
            });
        }
        let label: u8 = record[1].parse().map_err(|_| Error::Parse {
            path: display_path.clone(),
            line,
            message: format!("true_label {:?} is not an integer", &record[1]),
        })?;
        if label > 1 {
            return Err(Error::InvalidInput(format!(
                "{display_path}:{line}: non-binary true_label {label}"
            )));
        }
        gold.push((record[0].to_string(), label));
    }
    if gold.is_empty() {
        return Err(Error::InvalidInput(format!("{display_path}: empty gold file")));
    }
    Ok(gold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TaskSource;

    fn write_file(dir: &tempfile::TempDir, name: &str, contents: &str) -> PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn loads_a_small_log_and_builds_pools_in_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "log.csv",
            "task_id,worker_id,label\nt1,w1,1\nt2,w1,0\nt1,w2,1\nt1,w3,0\n",
        );
        let (instance, desc) = load_dataset(&path, DatasetFormat::Csv, None).unwrap();
        assert_eq!(desc.n_tasks, 2);
        assert_eq!(desc.responses_total, 4);
        assert_eq!(desc.per_task_counts, vec![3, 1]);
        assert_eq!(desc.task_ids, vec!["t1", "t2"]);
        assert_eq!(instance.budget_cap, Some(2));
        let TaskSource::Replay(pools) = &instance.source else { panic!() };
        let labels: Vec<u8> = pools[0].iter().map(|r| r.label.as_u8()).collect();
        assert_eq!(labels, vec![1, 1, 0]);
    }

    #[test]
    fn tsv_logs_parse_with_the_tab_delimiter() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "log.tsv",
            "task_id\tworker_id\tlabel\nt1\tw1\t1\nt1\tw2\t0\n",
        );
        assert_eq!(DatasetFormat::from_path(&path), DatasetFormat::Tsv);
        let (_, desc) = load_dataset(&path, DatasetFormat::Tsv, None).unwrap();
        assert_eq!(desc.responses_total, 2);
    }

    #[test]
    fn malformed_rows_report_their_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "log.csv", "task_id,worker_id,label\nt1,w1,1\nt2,w2\n");
        let err = load_dataset(&path, DatasetFormat::Csv, None).unwrap_err();
        let Error::Parse { line, .. } = err else { panic!("expected parse error, got {err}") };
        assert_eq!(line, 3);
    }

    #[test]
    fn non_binary_labels_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "log.csv", "task_id,worker_id,label\nt1,w1,2\n");
        assert!(matches!(
            load_dataset(&path, DatasetFormat::Csv, None),
            Err(Error::InvalidInput(_))
        ));
        let path = write_file(&dir, "bad.csv", "task_id,worker_id,label\nt1,w1,yes\n");
        assert!(matches!(
            load_dataset(&path, DatasetFormat::Csv, None),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn duplicate_task_worker_pairs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "log.csv",
            "task_id,worker_id,label\nt1,w1,1\nt1,w1,0\n",
        );
        assert!(matches!(
            load_dataset(&path, DatasetFormat::Csv, None),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn empty_and_header_only_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let header_only = write_file(&dir, "empty.csv", "task_id,worker_id,label\n");
        assert!(matches!(
            load_dataset(&header_only, DatasetFormat::Csv, None),
            Err(Error::InvalidInput(_))
        ));
        let wrong_header = write_file(&dir, "wrong.csv", "a,b,c\n1,2,1\n");
        assert!(matches!(
            load_dataset(&wrong_header, DatasetFormat::Csv, None),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn export_and_reload_round_trips_byte_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "log.csv",
            "task_id,worker_id,label\nt9,alice,1\nt2,bob,0\nt9,bob,1\nt2,alice,1\nt9,carol,0\n",
        );
        let (instance, desc) = load_dataset(&path, DatasetFormat::Csv, None).unwrap();
        let out1 = dir.path().join("export1.csv");
        export_dataset(&instance, &desc, &out1).unwrap();
        let (reloaded, redesc) = load_dataset(&out1, DatasetFormat::Csv, None).unwrap();
        let out2 = dir.path().join("export2.csv");
        export_dataset(&reloaded, &redesc, &out2).unwrap();
        assert_eq!(
            std::fs::read(&out1).unwrap(),
            std::fs::read(&out2).unwrap(),
            "export-load-export must be a fixed point"
        );
        assert_eq!(redesc.per_task_counts, desc.per_task_counts);
    }

    #[test]
    fn shuffle_seed_reorders_pools_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let rows: String = (0..30).map(|i| format!("t1,w{i},{}\n", i % 2)).collect();
        let path = write_file(&dir, "log.csv", &format!("task_id,worker_id,label\n{rows}"));
        let (a, _) = load_dataset(&path, DatasetFormat::Csv, Some(4)).unwrap();
        let (b, _) = load_dataset(&path, DatasetFormat::Csv, Some(4)).unwrap();
        let (c, _) = load_dataset(&path, DatasetFormat::Csv, None).unwrap();
        let (TaskSource::Replay(pa), TaskSource::Replay(pb), TaskSource::Replay(pc)) =
            (&a.source, &b.source, &c.source)
        else {
            panic!()
        };
        assert_eq!(pa, pb);
        assert_ne!(pa, pc, "a 30-item pool should be reordered by the shuffle");
    }

    #[test]
    fn gold_files_parse_and_validate() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "gold.csv", "task_id,true_label\nt1,1\nt2,0\n");
        let gold = load_gold(&path).unwrap();
        assert_eq!(gold, vec![("t1".to_string(), 1), ("t2".to_string(), 0)]);
        let bad = write_file(&dir, "bad.csv", "task_id,true_label\nt1,3\n");
        assert!(load_gold(&bad).is_err());
        let empty = write_file(&dir, "empty.csv", "task_id,true_label\n");
        assert!(load_gold(&empty).is_err());
    }

    #[test]
    fn descriptor_maps_original_ids_to_dense_indices() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "log.csv",
            "task_id,worker_id,label\nfoo,w1,1\nbar,w1,0\n",
        );
        let (_, desc) = load_dataset(&path, DatasetFormat::Csv, None).unwrap();
        assert_eq!(desc.task_index("foo"), Some(0));
        assert_eq!(desc.task_index("bar"), Some(1));
        assert_eq!(desc.task_index("baz"), None);
    }
}
