use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{stages, FailureTag, Stage, TrialResult};
use crate::synth::TaskKind;

/// One scored trial as stored in `results.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub task: String,
    pub method: String,
    pub trial: usize,
    pub seed: u64,
    pub result: TrialResult,
}

/// Identity of a benchmark run, stored as `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub config_digest: String,
    pub methods: Vec<String>,
    pub tasks: Vec<(String, TaskKind)>,
    pub n_trials: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: Stage,
    pub successes: usize,
    /// Successes at the prerequisite stage, or the trial count for the
    /// first stage.
    pub base: usize,
}

impl StageCount {
    /// Conditional success percentage; absent without any base trial.
    pub fn rate(&self) -> Option<f64> {
        (self.base > 0).then(|| 100.0 * self.successes as f64 / self.base as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SagStats {
    /// Trials with a grasp.
    pub n: usize,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub task: String,
    pub kind: TaskKind,
    pub method: String,
    pub trials: usize,
    pub stages: Vec<StageCount>,
    pub sag: Option<SagStats>,
    pub failures: BTreeMap<FailureTag, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config_digest: String,
    pub rows: Vec<MethodReport>,
}

/// SHA-256 of the JSON form of `cfg`, hex encoded.
pub fn config_digest<T: Serialize>(cfg: &T) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Conditional stage counts over a set of trial results.
pub fn stage_counts<'a>(kind: TaskKind, results: impl IntoIterator<Item = &'a TrialResult> + Clone) -> Vec<StageCount> {
    let trials = results.clone().into_iter().count();
    let mut base = trials;
    stages(kind)
        .iter()
        .map(|&stage| {
            let successes = results.clone().into_iter().filter(|r| r.passed(stage)).count();
            let c = StageCount { stage, successes, base };
            base = successes;
            c
        })
        .collect()
}

/// Reduces trial records to the report. Rows follow the header's task and
/// method order; the reduction does not depend on record order.
pub fn build_report(header: &RunHeader, records: &[TrialRecord]) -> BenchmarkReport {
    let mut rows = Vec::new();
    for (task, kind) in &header.tasks {
        for method in &header.methods {
            let mut mine: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| &r.task == task && &r.method == method)
                .collect();
            mine.sort_by_key(|r| r.trial);
            let results: Vec<&TrialResult> = mine.iter().map(|r| &r.result).collect();
            let sags: Vec<f64> = results.iter().filter_map(|r| r.sag).collect();
            let sag = (!sags.is_empty()).then(|| SagStats {
                n: sags.len(),
                mean: sags.iter().sum::<f64>() / sags.len() as f64,
                max: sags.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
            let mut failures = BTreeMap::new();
            for r in &results {
                *failures.entry(r.failure).or_insert(0) += 1;
            }
            rows.push(MethodReport {
                task: task.clone(),
                kind: *kind,
                method: method.clone(),
                trials: results.len(),
                stages: stage_counts(*kind, results.iter().copied()),
                sag,
                failures,
            });
        }
    }
    BenchmarkReport {
        config_digest: header.config_digest.clone(),
        rows,
    }
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "--".to_string(), |v| format!("{v:.1}"))
}

/// Fixed-width tables, one per task, methods as rows and stages as columns.
pub fn render_table(report: &BenchmarkReport) -> String {
    let mut out = format!("config sha256:{}\n", report.config_digest);
    let mut tasks: Vec<&str> = Vec::new();
    for r in &report.rows {
        if !tasks.contains(&r.task.as_str()) {
            tasks.push(&r.task);
        }
    }
    for task in tasks {
        let rows: Vec<&MethodReport> = report.rows.iter().filter(|r| r.task == task).collect();
        let kind = rows[0].kind;
        let w = rows.iter().map(|r| r.method.len()).max().unwrap_or(0).max(6);
        let _ = write!(out, "\ntask {task} ({kind})\n{:<w$}  {:>6}", "method", "trials");
        for s in stages(kind) {
            let _ = write!(out, "  {:>6}", s.as_str());
        }
        out.push_str("  sag mean   sag max\n");
        for r in rows {
            let _ = write!(out, "{:<w$}  {:>6}", r.method, r.trials);
            for c in &r.stages {
                let _ = write!(out, "  {:>6}", fmt_rate(c.rate()));
            }
            match r.sag {
                Some(s) => {
                    let _ = writeln!(out, "  {:>8.3}  {:>8.3}", s.mean, s.max);
                }
                None => {
                    let _ = writeln!(out, "  {:>8}  {:>8}", "--", "--");
                }
            }
        }
    }
    out
}

/// Plot data: `task,method,stage,rate,successes,base`, rate empty when
/// absent.
pub fn render_csv(report: &BenchmarkReport) -> String {
    let mut out = String::from("task,method,stage,rate,successes,base\n");
    for r in &report.rows {
        for c in &r.stages {
            let rate = c.rate().map(|v| format!("{v:.1}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{},{}", r.task, r.method, c.stage, rate, c.successes, c.base);
        }
    }
    out
}
