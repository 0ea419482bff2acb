//! Closed-loop evaluation: rubric tasks, staged trials and conditional-rate
//! reports.
//!
//! A trial flies a policy through the chunk executor in a [`World`] whose
//! controller ignores the payload mass. Detectors mark the gate (crossing the
//! plane forward inside the aperture), hover (inside the hover radius for the
//! hover duration), pick (a grasp) and place (a release inside the bin).
//! Stage rates are conditional on the prerequisite stage.
//!
//! [`World`]: crate::synth::World

mod bench;
mod oracle;
mod report;
mod task;
mod trial;

pub use bench::{
    read_run, read_run_log, report_from_dir, run_benchmark, trial_seed, write_run, BenchmarkRun, Method, MethodKind,
};
pub use oracle::OracleField;
pub use report::{
    build_report, config_digest, render_csv, render_table, stage_counts, BenchmarkReport, MethodReport, RunHeader,
    SagStats, StageCount, TrialRecord,
};
pub use task::{stages, Stage, StageParams, TaskSpec};
pub use trial::{run_trial, Executor, FailureTag, SimParams, StageTimes, Trial, TrialInit, TrialResult};
