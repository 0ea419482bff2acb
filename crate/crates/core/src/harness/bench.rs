use std::fs;
use std::io::{BufReader, BufWriter};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{build_report, run_trial, BenchmarkReport, Executor, RunHeader, SimParams, TaskSpec, Trial, TrialRecord};
use crate::error::{Error, Result};
use crate::guidance::{GuidanceSpec, PayloadSpec, Potential, Schedule};
use crate::policy::VelocityField;
use crate::rng;
use crate::rtc::{read_trial_log, write_trial_log, RtcConfig, Termination, TrialLog};

/// Inference-time variant under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodKind {
    #[serde(rename = "naive")]
    Naive,
    #[serde(rename = "rtc")]
    Rtc,
    #[serde(rename = "rtc+payload")]
    RtcPayload,
}

impl MethodKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodKind::Naive => "naive",
            MethodKind::Rtc => "rtc",
            MethodKind::RtcPayload => "rtc+payload",
        }
    }

    pub fn executor(self) -> Executor {
        match self {
            MethodKind::Naive => Executor::Naive,
            MethodKind::Rtc | MethodKind::RtcPayload => Executor::Rtc,
        }
    }

    /// Guidance added on top of the executor's own continuity term.
    pub fn guidance(self, payload: &PayloadSpec, schedule: Schedule) -> Result<Option<GuidanceSpec>> {
        match self {
            MethodKind::RtcPayload => Ok(Some(GuidanceSpec::new(vec![Potential::Payload(*payload)], schedule)?)),
            _ => Ok(None),
        }
    }
}

impl std::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [MethodKind::Naive, MethodKind::Rtc, MethodKind::RtcPayload]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}; expected naive, rtc or rtc+payload")))
    }
}

/// A policy plus the way it is run. `name` labels report rows, e.g.
/// `rtc+payload/synthetic`.
pub struct Method<'a> {
    pub name: String,
    pub executor: Executor,
    pub guidance: Option<GuidanceSpec>,
    pub field: &'a dyn VelocityField,
}

impl<'a> Method<'a> {
    pub fn new(
        name: impl Into<String>,
        kind: MethodKind,
        field: &'a dyn VelocityField,
        payload: &PayloadSpec,
        schedule: Schedule,
    ) -> Result<Self> {
        Ok(Method {
            name: name.into(),
            executor: kind.executor(),
            guidance: kind.guidance(payload, schedule)?,
            field,
        })
    }
}

/// Report, scored trials and raw logs of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub header: RunHeader,
    pub records: Vec<TrialRecord>,
    pub logs: Vec<TrialLog>,
    pub report: BenchmarkReport,
}

/// Seed of trial `trial` of task `task_index`; shared by every method so
/// that comparisons are paired.
pub fn trial_seed(master: u64, task_index: usize, trial: usize) -> u64 {
    rng::split(rng::split(master, task_index as u64), trial as u64)
}

fn panicked(task: &TaskSpec, message: String) -> Trial {
    let log = TrialLog {
        records: Vec::new(),
        termination: Termination::Aborted {
            tag: "crash".into(),
            message,
        },
    };
    let result = super::TrialResult {
        kind: task.kind,
        gate: false,
        hover: false,
        pick: false,
        place: false,
        failure: super::FailureTag::Crash,
        times: Default::default(),
        sag: None,
        duration: 0.0,
    };
    Trial { result, log }
}

/// Runs every method on every task for `n_trials` seeded trials.
///
/// A trial that panics or errors is scored as a crash; the sweep continues.
pub fn run_benchmark(
    methods: &[Method<'_>],
    tasks: &[TaskSpec],
    n_trials: usize,
    master_seed: u64,
    rtc: &RtcConfig,
    params: &SimParams,
    config_digest: String,
) -> Result<BenchmarkRun> {
    rtc.validate()?;
    for t in tasks {
        t.validate()?;
    }
    let jobs: Vec<(usize, usize, usize)> = (0..tasks.len())
        .flat_map(|ti| (0..methods.len()).flat_map(move |mi| (0..n_trials).map(move |k| (ti, mi, k))))
        .collect();
    let one = |&(ti, mi, k): &(usize, usize, usize)| {
        let (task, method) = (&tasks[ti], &methods[mi]);
        let seed = trial_seed(master_seed, ti, k);
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            run_trial(method.field, method.guidance.as_ref(), rtc, method.executor, task, params, seed)
        }));
        let trial = match outcome {
            Ok(Ok(t)) => t,
            Ok(Err(e)) => panicked(task, e.to_string()),
            Err(_) => panicked(task, "trial panicked".into()),
        };
        let record = TrialRecord {
            task: task.name.clone(),
            method: method.name.clone(),
            trial: k,
            seed,
            result: trial.result,
        };
        (record, trial.log)
    };
    #[cfg(feature = "parallel")]
    let done: Vec<_> = {
        use rayon::prelude::*;
        jobs.par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let done: Vec<_> = jobs.iter().map(one).collect();
    let (records, logs): (Vec<_>, Vec<_>) = done.into_iter().unzip();
    let header = RunHeader {
        config_digest,
        methods: methods.iter().map(|m| m.name.clone()).collect(),
        tasks: tasks.iter().map(|t| (t.name.clone(), t.kind)).collect(),
        n_trials,
        master_seed,
    };
    let report = build_report(&header, &records);
    Ok(BenchmarkRun {
        header,
        records,
        logs,
        report,
    })
}

fn log_name(r: &TrialRecord) -> String {
    let clean = |s: &str| s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect::<String>();
    format!("{}__{}__{:03}.jsonl", clean(&r.task), clean(&r.method), r.trial)
}

/// Writes `run.json`, `results.jsonl`, `trials/*.jsonl`, `report.txt` and
/// `report.csv` under `dir`.
pub fn write_run(dir: impl AsRef<Path>, run: &BenchmarkRun) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("trials"))?;
    fs::write(dir.join("run.json"), serde_json::to_string_pretty(&run.header)? + "\n")?;
    let mut results = String::new();
    for r in &run.records {
        results.push_str(&serde_json::to_string(r)?);
        results.push('\n');
    }
    fs::write(dir.join("results.jsonl"), results)?;
    for (r, log) in run.records.iter().zip(&run.logs) {
        write_trial_log(log, BufWriter::new(fs::File::create(dir.join("trials").join(log_name(r)))?))?;
    }
    fs::write(dir.join("report.txt"), super::render_table(&run.report))?;
    fs::write(dir.join("report.csv"), super::render_csv(&run.report))?;
    Ok(())
}

/// Header and trial records of a stored run.
pub fn read_run(dir: impl AsRef<Path>) -> Result<(RunHeader, Vec<TrialRecord>)> {
    let dir = dir.as_ref();
    let header: RunHeader = serde_json::from_str(&fs::read_to_string(dir.join("run.json"))?)?;
    let mut records = Vec::new();
    for (i, line) in fs::read_to_string(dir.join("results.jsonl"))?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: TrialRecord =
            serde_json::from_str(line).map_err(|e| Error::invalid(format!("results.jsonl line {}: {e}", i + 1)))?;
        records.push(r);
    }
    Ok((header, records))
}

/// Reads the raw log of one stored trial.
pub fn read_run_log(dir: impl AsRef<Path>, record: &TrialRecord) -> Result<TrialLog> {
    let f = fs::File::open(dir.as_ref().join("trials").join(log_name(record)))?;
    read_trial_log(BufReader::new(f))
}

/// Rebuilds the report of a stored run.
pub fn report_from_dir(dir: impl AsRef<Path>) -> Result<BenchmarkReport> {
    let (header, records) = read_run(dir)?;
    Ok(build_report(&header, &records))
}
