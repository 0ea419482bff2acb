use std::fs;

use airchunk::harness::*;
use airchunk::policy::{ActionChunk, Observation, VelocityField, ACTION_DIM};
use airchunk::rtc::RtcConfig;
use airchunk::synth::TaskKind;

// The oracle cannot see a frozen prefix, so it runs without one.
fn oracle_rtc() -> RtcConfig {
    RtcConfig {
        delay: 0,
        ..RtcConfig::default()
    }
}

fn oracle_trial(task: &TaskSpec, seed: u64) -> Trial {
    let rtc = oracle_rtc();
    let field = OracleField::new(task.scene.gate, rtc.horizon);
    run_trial(&field, None, &rtc, Executor::Rtc, task, &SimParams::default(), seed).unwrap()
}

/// A degenerate source at zero and no flow: every sample is the zero chunk.
struct ZeroField;

const ZEROS: [f64; ACTION_DIM] = [0.0; ACTION_DIM];

impl VelocityField for ZeroField {
    fn shape(&self) -> (usize, usize) {
        (25, ACTION_DIM)
    }

    fn eval(&self, x: &ActionChunk, _: &Observation, _: f64) -> ActionChunk {
        ActionChunk::zeros(x.rows(), x.cols())
    }

    fn source(&self) -> Option<(&[f64], &[f64])> {
        Some((&ZEROS, &ZEROS))
    }

    fn vjp(&self, x: &ActionChunk, _: &Observation, _: f64, _: &ActionChunk) -> ActionChunk {
        ActionChunk::zeros(x.rows(), x.cols())
    }
}

#[test]
fn oracle_completes_every_task() {
    for task in [TaskSpec::gate_nav(), TaskSpec::pick_place(), TaskSpec::compositional()] {
        for seed in 0..3 {
            let t = oracle_trial(&task, seed);
            t.result.validate().unwrap();
            t.log.validate().unwrap();
            assert_eq!(t.result.failure, FailureTag::None, "{} seed {seed}: {:?}", task.name, t.result);
            if task.kind.manipulates() {
                assert!(t.result.sag.is_some());
            }
        }
    }
}

#[test]
fn zero_chunks_time_out_at_the_first_stage() {
    for task in [TaskSpec::gate_nav(), TaskSpec::pick_place()] {
        let t = run_trial(&ZeroField, None, &RtcConfig::default(), Executor::Rtc, &task, &SimParams::default(), 4)
            .unwrap();
        assert_eq!(t.result.failure, FailureTag::Timeout, "{}", task.name);
        assert!(!t.result.passed(task.stages()[0]));
        t.result.validate().unwrap();
    }
}

#[test]
fn equal_seeds_give_equal_trials() {
    let task = TaskSpec::compositional();
    let a = oracle_trial(&task, 11);
    let b = oracle_trial(&task, 11);
    assert_eq!(a, b);
    assert_ne!(TrialInit::draw(&task, 11), TrialInit::draw(&task, 12));
}

#[test]
fn wrong_order_only_in_compositional_results() {
    for task in [TaskSpec::gate_nav(), TaskSpec::pick_place()] {
        for seed in 0..4 {
            assert_ne!(oracle_trial(&task, seed).result.failure, FailureTag::WrongOrder);
        }
    }
    let mut r = oracle_trial(&TaskSpec::pick_place(), 0).result;
    r.pick = false;
    r.place = false;
    r.failure = FailureTag::WrongOrder;
    assert!(r.validate().is_err());
    r.kind = TaskKind::Compositional;
    r.validate().unwrap();
}

#[test]
fn validate_rejects_broken_stage_chains() {
    let mut r = oracle_trial(&TaskSpec::gate_nav(), 0).result;
    r.validate().unwrap();
    r.gate = false;
    assert!(r.validate().is_err());
    let mut r = oracle_trial(&TaskSpec::gate_nav(), 0).result;
    r.pick = true;
    assert!(r.validate().is_err());
    let mut r = oracle_trial(&TaskSpec::gate_nav(), 0).result;
    r.failure = FailureTag::NoHover;
    assert!(r.validate().is_err());
}

fn pick_result(pick: bool, place: bool, sag: Option<f64>) -> TrialResult {
    let failure = match (pick, place) {
        (true, true) => FailureTag::None,
        (true, false) => FailureTag::DropAfterGrasp,
        _ => FailureTag::MissedGrasp,
    };
    TrialResult {
        kind: TaskKind::PickPlace,
        gate: false,
        hover: false,
        pick,
        place,
        failure,
        times: StageTimes::default(),
        sag,
        duration: 30.0,
    }
}

/// 20 trials, 17 picks, 10 places.
fn worked_example() -> (RunHeader, Vec<TrialRecord>) {
    let header = RunHeader {
        config_digest: "0".repeat(64),
        methods: vec!["rtc/synthetic".into(), "idle".into()],
        tasks: vec![("pick_place".into(), TaskKind::PickPlace)],
        n_trials: 20,
        master_seed: 0,
    };
    let records = (0..20)
        .map(|k| TrialRecord {
            task: "pick_place".into(),
            method: "rtc/synthetic".into(),
            trial: k,
            seed: k as u64,
            result: pick_result(k < 17, k < 10, (k < 17).then(|| 0.01 * (k + 1) as f64)),
        })
        .collect();
    (header, records)
}

#[test]
fn conditional_rates_of_the_worked_example() {
    let (header, records) = worked_example();
    let report = build_report(&header, &records);
    let row = &report.rows[0];
    assert_eq!(row.trials, 20);
    let pick = row.stages[0];
    let place = row.stages[1];
    assert_eq!((pick.successes, pick.base), (17, 20));
    assert_eq!((place.successes, place.base), (10, 17));
    assert_eq!(format!("{:.1}", pick.rate().unwrap()), "85.0");
    assert_eq!(format!("{:.1}", place.rate().unwrap()), "58.8");
    for c in &row.stages {
        assert_eq!((c.rate().unwrap() * c.base as f64 / 100.0).round() as usize, c.successes);
    }
    let sag = row.sag.unwrap();
    assert_eq!(sag.n, 17);
    assert!((sag.max - 0.17).abs() < 1e-12);
    assert_eq!(row.failures[&FailureTag::MissedGrasp], 3);
}

#[test]
fn method_without_trials_has_absent_rates() {
    let (header, records) = worked_example();
    let report = build_report(&header, &records);
    let idle = &report.rows[1];
    assert_eq!(idle.trials, 0);
    assert!(idle.stages.iter().all(|c| c.rate().is_none()));
    assert!(idle.sag.is_none());
    assert!(render_table(&report).lines().any(|l| l.starts_with("idle") && l.contains("--")));
}

#[test]
fn report_ignores_record_order() {
    let (header, mut records) = worked_example();
    let a = build_report(&header, &records);
    records.reverse();
    records.swap(3, 11);
    assert_eq!(build_report(&header, &records), a);
}

#[test]
fn rendered_report_matches_golden() {
    let (header, records) = worked_example();
    let report = build_report(&header, &records);
    let golden = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden");
    assert_eq!(render_table(&report), fs::read_to_string(format!("{golden}/report.txt")).unwrap());
    assert_eq!(render_csv(&report), fs::read_to_string(format!("{golden}/report.csv")).unwrap());
}

#[test]
fn single_method_single_stage_is_one_csv_row() {
    let header = RunHeader {
        config_digest: "d".into(),
        methods: vec!["m".into()],
        tasks: vec![("t".into(), TaskKind::PickPlace)],
        n_trials: 1,
        master_seed: 0,
    };
    let report = build_report(&header, &[]);
    let mut one = report.clone();
    one.rows[0].stages.truncate(1);
    assert_eq!(render_csv(&one).lines().count(), 2);
}

#[test]
fn stored_run_regenerates_byte_identically() {
    let tasks = [TaskSpec::gate_nav(), TaskSpec::pick_place()];
    let rtc = oracle_rtc();
    let oracle = OracleField::new(tasks[0].scene.gate, rtc.horizon);
    let methods = vec![
        Method::new("rtc/oracle", MethodKind::Rtc, &oracle, &Default::default(), Default::default()).unwrap(),
        Method::new("naive/oracle", MethodKind::Naive, &oracle, &Default::default(), Default::default()).unwrap(),
    ];
    let run = run_benchmark(&methods, &tasks, 2, 9, &rtc, &SimParams::default(), "abc".into()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_run(dir.path(), &run).unwrap();
    let again = report_from_dir(dir.path()).unwrap();
    assert_eq!(again, run.report);
    assert_eq!(render_table(&again), fs::read_to_string(dir.path().join("report.txt")).unwrap());
    assert_eq!(render_csv(&again), fs::read_to_string(dir.path().join("report.csv")).unwrap());
    for (r, log) in run.records.iter().zip(&run.logs) {
        assert_eq!(&read_run_log(dir.path(), r).unwrap(), log);
    }
}

#[test]
fn panicking_field_is_scored_as_crash() {
    struct Bomb;
    impl VelocityField for Bomb {
        fn shape(&self) -> (usize, usize) {
            (25, ACTION_DIM)
        }
        fn eval(&self, _: &ActionChunk, _: &Observation, _: f64) -> ActionChunk {
            panic!("boom")
        }
        fn vjp(&self, x: &ActionChunk, _: &Observation, _: f64, _: &ActionChunk) -> ActionChunk {
            x.clone()
        }
    }
    let methods = vec![Method::new("bomb", MethodKind::Rtc, &Bomb, &Default::default(), Default::default()).unwrap()];
    let run = run_benchmark(
        &methods,
        &[TaskSpec::gate_nav()],
        2,
        0,
        &RtcConfig::default(),
        &SimParams::default(),
        "x".into(),
    )
    .unwrap();
    assert!(run.records.iter().all(|r| r.result.failure == FailureTag::Crash));
}

