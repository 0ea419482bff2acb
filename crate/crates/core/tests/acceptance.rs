//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a subset:
//! `cargo test -p airchunk --test acceptance -- 1 4 10`.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{Quaternion, Vector3};
use rand::Rng as _;

use airchunk::config::Config;
use airchunk::dynamics::{step_rk4, ControlInput, ControllerGains, DroneParams, DroneState};
use airchunk::guidance::{
    payload_confidence, payload_potential, tracking_gradient, tracking_potential, Guidance, GuidanceSpec, PayloadSpec,
    Potential, Schedule, TrackingSpec,
};
use airchunk::harness::*;
use airchunk::policy::{
    sample_chunk, train_flow_matching, ActionChunk, GaussianField, MlpField, Observation, Setpoint, TaskToken,
    TrainConfig, ACTION_DIM,
};
use airchunk::rng::{rng, split};
use airchunk::rtc::{
    execute_loop, execute_loop_threaded, execute_naive, plan_next_chunk, Flow, PlanRequest, RtcConfig, SimBinding,
};
use airchunk::synth::{generate_dataset, validate_dataset, Dataset, RolloutStatus, Scene, SynthConfig, TaskKind};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- dynamics

fn criterion_1() -> Check {
    let params = DroneParams::default();
    let g = params.gravity;

    let p0 = Vector3::new(0.5, -1.0, 20.0);
    let v0 = Vector3::new(1.0, -2.0, 3.0);
    let mut s = DroneState {
        position: p0,
        velocity: v0,
        attitude: Quaternion::new(0.9, 0.1, -0.3, 0.2).normalize(),
    };
    let coast = ControlInput::new(0.0, Vector3::new(0.4, -0.2, 0.9));
    for _ in 0..100 {
        s = ok(step_rk4(&s, &coast, 0.01, &params))?;
    }
    let ballistic = p0 + v0 + 0.5 * g;
    let fall_err = (s.position - ballistic).amax().max((s.velocity - (v0 + g)).amax());
    ensure!(fall_err <= 1e-9, "free fall off the closed form by {fall_err:.3e}");

    let input = ControlInput::new(0.8, Vector3::new(1.5, -1.0, 2.0));
    let start = DroneState {
        position: Vector3::new(0.0, 0.0, 1.0),
        velocity: Vector3::new(0.5, 0.0, -0.2),
        attitude: Quaternion::identity(),
    };
    let integrate = |dt: f64| -> Result<DroneState, String> {
        let n = (2.0 / dt).round() as usize;
        let mut s = start;
        for _ in 0..n {
            s = ok(step_rk4(&s, &input, dt, &params))?;
        }
        Ok(s)
    };
    let reference = integrate(0.05 / 256.0)?;
    let dts = [0.05, 0.025, 0.0125, 0.00625];
    let mut errs = Vec::new();
    for &dt in &dts {
        let s = integrate(dt)?;
        errs.push((s.position - reference.position).norm() + (s.velocity - reference.velocity).norm());
    }
    // Least-squares slope of log error against log dt.
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let order = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    ensure!(order >= 3.8, "convergence order {order:.3} (errors {errs:?})");

    let spin = ControlInput::new(0.5, Vector3::new(3.0, -2.0, 5.0));
    let mut s = DroneState::at_rest(Vector3::zeros());
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        s = ok(step_rk4(&s, &spin, 0.01, &params))?;
        worst = worst.max((s.attitude.norm() - 1.0).abs());
    }
    ensure!(worst <= 1e-9, "quaternion norm drift {worst:.3e}");

    Ok(format!("free fall {fall_err:.1e} m, order {order:.2}, max |q|-1 {worst:.1e}"))
}

// ---------------------------------------------------------------- guidance

fn random_chunk(r: &mut airchunk::rng::Rng, scale: f64) -> ActionChunk {
    let v = (0..25 * ACTION_DIM).map(|_| r.random_range(-scale..scale)).collect();
    ActionChunk::from_vec(25, ACTION_DIM, v).unwrap()
}

fn central_difference(f: impl Fn(&ActionChunk) -> f64, a: &ActionChunk) -> ActionChunk {
    let eps = 1e-5;
    let mut g = ActionChunk::zeros(a.rows(), a.cols());
    for i in 0..a.as_slice().len() {
        let mut p = a.clone();
        let mut m = a.clone();
        p.as_mut_slice()[i] += eps;
        m.as_mut_slice()[i] -= eps;
        g.as_mut_slice()[i] = (f(&p) - f(&m)) / (2.0 * eps);
    }
    g
}

fn relative_error(numeric: &ActionChunk, analytic: &ActionChunk) -> f64 {
    let mut diff = numeric.clone();
    diff.axpy(-1.0, analytic);
    diff.dot(&diff).sqrt() / analytic.dot(analytic).sqrt().max(1e-12)
}

fn criterion_2() -> Check {
    let mut r = rng(2);
    let (mut worst_tracking, mut worst_payload): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let a = random_chunk(&mut r, 0.5);
        let des = random_chunk(&mut r, 0.5);
        let lambda = (0..ACTION_DIM).map(|_| r.random_range(0.0..3.0)).collect();
        let weights = (0..25).map(|_| r.random_range(0.0..1.0)).collect();
        let spec = ok(TrackingSpec::new(des, lambda, weights))?;
        let numeric = central_difference(|c| tracking_potential(c, &spec), &a);
        worst_tracking = worst_tracking.max(relative_error(&numeric, &tracking_gradient(&a, &spec)));

        let spec = PayloadSpec {
            gamma: r.random_range(0.0..3.0),
            ..PayloadSpec::default()
        };
        let obs = Observation::new(
            Vector3::new(1.0, 0.0, r.random_range(0.2..2.0)),
            0.0,
            r.random_range(0.0..0.3),
            Vector3::new(3.0, 0.0, 1.0),
            TaskToken::PICK_PLACE,
        );
        let hist: Vec<f64> = (0..4).map(|_| r.random_range(0.5..1.0)).collect();
        let (_, analytic) = payload_potential(&a, &obs, &hist, &spec);
        let numeric = central_difference(|c| payload_potential(c, &obs, &hist, &spec).0, &a);
        worst_payload = worst_payload.max(relative_error(&numeric, &analytic));
    }
    ensure!(
        worst_tracking < 1e-6 && worst_payload < 1e-6,
        "relative error tracking {worst_tracking:.2e}, payload {worst_payload:.2e}"
    );
    Ok(format!("max relative error tracking {worst_tracking:.1e}, payload {worst_payload:.1e}"))
}

fn criterion_3() -> Check {
    let (mu, sigma) = (2.0, 1.0);
    let field = ok(GaussianField::constant(ActionChunk::filled(1, 1, mu), vec![sigma]))?;
    let obs = Observation::new(Vector3::zeros(), 0.0, 1.0, Vector3::zeros(), TaskToken::GATE_NAV);
    let n = 10_000;
    let mean_for = |lambda: f64| -> Result<(f64, f64), String> {
        let spec = ok(GuidanceSpec::new(
            vec![Potential::Tracking(ok(TrackingSpec::new(ActionChunk::zeros(1, 1), vec![lambda], vec![1.0]))?)],
            Schedule::default(),
        ))?;
        let mut xs = Vec::with_capacity(n);
        for seed in 0..n as u64 {
            let c = ok(sample_chunk(&field, &obs, 64, seed, Some(Guidance::new(&spec, &[]))))?;
            xs.push(c.as_slice()[0]);
        }
        let m = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok((m, (var / n as f64).sqrt()))
    };
    let (m0, se) = mean_for(0.0)?;
    ensure!((m0 - mu).abs() <= 3.0 * se, "unguided mean {m0:.4} vs {mu} (se {se:.4})");
    let mut means = Vec::new();
    for lambda in [0.1, 1.0, 10.0] {
        let (m, _) = mean_for(lambda)?;
        let product = (mu / (sigma * sigma)) / (1.0 / (sigma * sigma) + lambda);
        ensure!(m > product && m < mu, "lambda {lambda}: mean {m:.4} outside ({product:.4}, {mu})");
        means.push(m);
    }
    ensure!(means.windows(2).all(|p| p[1] < p[0]), "means not decreasing: {means:.4?}");
    Ok(format!("lambda 0 mean {m0:.4} (se {se:.4}); lambda 0.1/1/10 means {means:.3?}"))
}

fn criterion_4() -> Check {
    let spec = PayloadSpec::default();
    let cases = [([1.0; 4], 0.0, 1.0), ([-1.0; 4], 1.0, 0.0), ([1.0, 1.0, -1.0, -1.0], 0.5, 0.125)];
    let mut got = Vec::new();
    for (commands, aperture, expected) in cases {
        let alpha = payload_confidence(&commands, aperture, &spec).alpha;
        ensure!(alpha == expected, "commands {commands:?} aperture {aperture}: alpha {alpha} != {expected}");
        got.push(alpha);
    }
    Ok(format!("alpha = {got:?}"))
}

// ---------------------------------------------------------------- rtc

/// Kinematic stand-in: the vehicle sits exactly on the last setpoint.
struct Follower {
    obs: Observation,
}

impl SimBinding for Follower {
    fn observe(&mut self) -> Observation {
        self.obs.clone()
    }

    fn apply(&mut self, sp: &Setpoint) -> airchunk::Result<Flow> {
        self.obs.position = sp.position;
        self.obs.yaw = sp.yaw;
        Ok(Flow::Continue)
    }
}

fn follower() -> Follower {
    Follower {
        obs: Observation::new(Vector3::new(0.0, 0.0, 1.0), 0.0, 1.0, Vector3::new(3.0, 0.0, 1.0), TaskToken::GATE_NAV),
    }
}

/// Unit-scale oracle, the scale the learned field samples in.
fn gaussian_oracle() -> GaussianField {
    let mut mean = ActionChunk::zeros(25, ACTION_DIM);
    for t in 0..25 {
        let row = [0.05, 0.02 * (0.3 * t as f64).sin(), 0.01, 0.0, -0.5];
        mean.row_mut(t).copy_from_slice(&row);
    }
    GaussianField::constant(mean, vec![1.0; ACTION_DIM]).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn criterion_5() -> Check {
    let field = gaussian_oracle();
    let cfg = RtcConfig::default();
    let obs = follower().obs;
    let b = cfg.delay;
    let period = cfg.period();

    // Frozen prefix.
    let mut r = rng(5);
    for k in 0..100u64 {
        let prev = random_chunk(&mut r, 0.3);
        let shift = r.random_range(0..=25 - b);
        let req = PlanRequest {
            observation: obs.clone(),
            prev_chunk: Some(prev.clone()),
            shift,
            gripper_history: vec![-1.0; 4],
            seed: split(5, k),
        };
        let out = ok(plan_next_chunk(&field, None, &req, &cfg))?;
        let target = prev.shifted(shift);
        for t in 0..b {
            ensure!(out.chunk.row(t) == target.row(t), "plan {k}: row {t} differs from the shifted chunk");
        }
    }

    // Liveness for every latency up to the prefix, inline and threaded.
    for latency in 0..=b {
        let c = RtcConfig {
            latency: Some(latency),
            ..cfg.clone()
        };
        let log = ok(execute_loop(&field, None, &mut follower(), &c, 11, 200))?;
        ensure!(log.records.len() == 200, "latency {latency}: {} ticks", log.records.len());
        ok(log.validate()).map_err(|e| format!("latency {latency}: {e}"))?;
        let threaded = ok(execute_loop_threaded(&field, None, &mut follower(), &c, 11, 200))?;
        ensure!(threaded == log, "latency {latency}: threaded log differs");
    }

    // Naive mode against the generic loop with naive settings.
    let naive_settings = RtcConfig {
        delay: 0,
        latency: Some(0),
        period: Some(cfg.horizon),
        ..cfg.clone()
    };
    for seed in 0..10 {
        let naive = ok(execute_naive(&field, None, &mut follower(), &cfg, seed, 150))?;
        let generic = ok(execute_loop(&field, None, &mut follower(), &naive_settings, seed, 150))?;
        ensure!(naive == generic, "seed {seed}: naive and generic logs differ");
    }

    // Boundary jump at the first fresh row, soft mask against no continuity.
    let unmasked = RtcConfig {
        schedule: Schedule::Constant { s0: 0.0 },
        ..cfg.clone()
    };
    let (mut soft, mut none) = (Vec::new(), Vec::new());
    for k in 0..100u64 {
        let prev = ok(sample_chunk(&field, &obs, cfg.n_denoise, split(50, k), None))?;
        let req = PlanRequest {
            observation: obs.clone(),
            prev_chunk: Some(prev.clone()),
            shift: period,
            gripper_history: vec![-1.0; 4],
            seed: split(51, k),
        };
        let target = prev.shifted(period);
        let jump = |c: &RtcConfig| -> Result<f64, String> {
            let out = ok(plan_next_chunk(&field, None, &req, c))?;
            Ok(out.chunk.row(b).iter().zip(target.row(b)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
        };
        soft.push(jump(&cfg)?);
        none.push(jump(&unmasked)?);
    }
    let (ms, mn) = (median(soft), median(none));
    ensure!(ms < mn, "median boundary jump {ms:.4} with the soft mask, {mn:.4} without");
    Ok(format!(
        "prefix bit-equal in 100 plans, live for latency 0..={b}, naive == generic, median jump {ms:.4} < {mn:.4}"
    ))
}

// ---------------------------------------------------------------- synth

fn criterion_6() -> Check {
    let cfg = SynthConfig::default();
    let params = DroneParams::default();
    let gains = ControllerGains::default();
    let gen = || generate_dataset(&Scene::gate_default(), TaskKind::GateNav, &cfg, &params, &gains, 1000, 6);
    let t0 = Instant::now();
    let ds = ok(gen())?;
    let elapsed = t0.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "generation took {elapsed:.1?}");
    let kept = ds.rollouts.iter().filter(|r| matches!(r.status, RolloutStatus::Kept { .. })).count();
    ensure!(kept == 1000, "{kept}/1000 rollouts kept");
    let v = validate_dataset(&ds, &cfg, &params);
    ensure!(v.is_ok(), "{} violations, first: {}", v.errors.len(), v.errors[0]);

    let r = &cfg.randomization;
    let (mut h_lo, mut h_hi, mut delta): (f64, f64, f64) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for s in &ds.rollouts {
        let plan = s.plan.as_ref().ok_or("rollout without a plan")?;
        h_lo = h_lo.min(plan.nominal.h);
        h_hi = h_hi.max(plan.nominal.h);
        delta = delta.max(plan.nominal.after_gate_offset.norm());
    }
    ensure!(h_lo >= r.h_range[0] && h_hi <= r.h_range[1], "h spans [{h_lo}, {h_hi}]");
    ensure!(delta <= r.after_gate_radius, "after-gate offset {delta}");

    let again = ok(gen())?;
    ensure!(again.records == ds.records && again.rollouts == ds.rollouts, "regeneration differs");
    Ok(format!(
        "1000/1000 kept and valid, h in [{h_lo:.3}, {h_hi:.3}], max |delta| {delta:.3}, deterministic, {:.1} s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- learning

fn gate_dataset(recovery_fraction: f64) -> Result<Dataset, String> {
    let mut cfg = SynthConfig::default();
    cfg.randomization.recovery_fraction = recovery_fraction;
    ok(generate_dataset(
        &Scene::gate_default(),
        TaskKind::GateNav,
        &cfg,
        &DroneParams::default(),
        &ControllerGains::default(),
        200,
        7,
    ))
}

fn train(ds: &Dataset, epochs: usize) -> Result<(MlpField, f64, f64), String> {
    let trained = ok(train_flow_matching(&ds.pairs(), &TrainConfig { epochs, ..TrainConfig::default() }))?;
    let r = &trained.report;
    let (init, fin) = (r.initial_heldout_loss.ok_or("no held-out split")?, r.final_heldout_loss.ok_or("no held-out split")?);
    Ok((trained.field, init, fin))
}

fn gate_rate(field: &MlpField, task: TaskSpec) -> Result<usize, String> {
    let method = ok(Method::new("rtc", MethodKind::Rtc, field, &PayloadSpec::default(), Schedule::default()))?;
    let run = ok(run_benchmark(&[method], &[task], 20, 3, &RtcConfig::default(), &SimParams::default(), String::new()))?;
    Ok(run.records.iter().filter(|r| r.result.gate).count())
}

fn criterion_7(store: &mut Option<MlpField>) -> Check {
    let t0 = Instant::now();
    let ds = gate_dataset(0.5)?;
    let (field, init, fin) = train(&ds, 150)?;
    let reduction = 1.0 - fin / init;
    let gates = gate_rate(&field, TaskSpec::gate_nav())?;
    *store = Some(field);
    let elapsed = t0.elapsed();
    ensure!(reduction >= 0.5, "held-out loss {init:.3} -> {fin:.3}");
    ensure!(gates >= 16, "gate traversal {gates}/20");
    ensure!(elapsed < Duration::from_secs(600), "took {elapsed:.1?}");
    Ok(format!(
        "held-out loss {init:.3} -> {fin:.3} (-{:.0}%), gate {gates}/20 under rtc",
        100.0 * reduction
    ))
}

fn criterion_8() -> Check {
    let t0 = Instant::now();
    let mut cfg = SynthConfig::default();
    cfg.randomization.recovery_fraction = 0.0;
    let ds = ok(generate_dataset(
        &Scene::pick_place_default(),
        TaskKind::PickPlace,
        &cfg,
        &DroneParams::default(),
        &ControllerGains::default(),
        300,
        7,
    ))?;
    let (field, _, _) = train(&ds, 200)?;
    let config = Config::default();
    let methods = vec![
        ok(config.method("rtc", MethodKind::Rtc, &field))?,
        ok(config.method("rtc+payload", MethodKind::RtcPayload, &field))?,
    ];
    let task = TaskSpec::pick_place();
    ensure!((task.payload_ratio - 0.3).abs() < 1e-12, "payload ratio {}", task.payload_ratio);
    let run = ok(run_benchmark(&methods, &[task], 50, 5, &RtcConfig::default(), &SimParams::default(), String::new()))?;
    let rows = &run.report.rows;
    let sag = |i: usize| rows[i].sag.map(|s| s.mean).ok_or(format!("{}: no grasps", rows[i].method));
    let (base, guided) = (sag(0)?, sag(1)?);
    let place = |i: usize| rows[i].stages[1].successes;
    let reduction = 1.0 - guided / base;
    let elapsed = t0.elapsed();
    ensure!(reduction >= 0.3, "mean sag {base:.3} -> {guided:.3} m");
    ensure!(place(1) >= place(0), "place {} -> {}", place(0), place(1));
    ensure!(elapsed < Duration::from_secs(600), "took {elapsed:.1?}");
    Ok(format!(
        "mean sag {base:.3} -> {guided:.3} m (-{:.0}%), place {}/50 -> {}/50",
        100.0 * reduction,
        place(0),
        place(1)
    ))
}

fn criterion_9(recovery: Option<MlpField>) -> Check {
    let recovery = match recovery {
        Some(f) => f,
        None => train(&gate_dataset(0.5)?, 150)?.0,
    };
    let (nominal, _, _) = train(&gate_dataset(0.0)?, 150)?;
    let mut task = TaskSpec::gate_nav();
    task.start_box = Config::default().eval.perturbed_start_box;
    let (r, n) = (gate_rate(&recovery, task.clone())?, gate_rate(&nominal, task)?);
    ensure!(r >= n, "recovery-augmented {r}/20 below nominal-only {n}/20");
    Ok(format!("gate from perturbed starts: recovery-augmented {r}/20, nominal-only {n}/20"))
}

// ---------------------------------------------------------------- reporting

fn criterion_10() -> Check {
    let header = RunHeader {
        config_digest: "0".repeat(64),
        methods: vec!["rtc".into()],
        tasks: vec![("pick_place".into(), TaskKind::PickPlace)],
        n_trials: 20,
        master_seed: 0,
    };
    let records: Vec<TrialRecord> = (0..20)
        .map(|k| TrialRecord {
            task: "pick_place".into(),
            method: "rtc".into(),
            trial: k,
            seed: k as u64,
            result: TrialResult {
                kind: TaskKind::PickPlace,
                gate: false,
                hover: false,
                pick: k < 17,
                place: k < 10,
                failure: match k {
                    0..10 => FailureTag::None,
                    10..17 => FailureTag::DropAfterGrasp,
                    _ => FailureTag::MissedGrasp,
                },
                times: StageTimes::default(),
                sag: (k < 17).then_some(0.05),
                duration: 30.0,
            },
        })
        .collect();
    let report = build_report(&header, &records);
    let rates: Vec<String> = report.rows[0].stages.iter().map(|c| format!("{:.1}", c.rate().unwrap_or(f64::NAN))).collect();
    ensure!(rates == ["85.0", "58.8"], "rates {rates:?}");

    let rtc = RtcConfig { delay: 0, ..RtcConfig::default() };
    let tasks = [TaskSpec::gate_nav(), TaskSpec::pick_place()];
    let oracle = OracleField::new(tasks[0].scene.gate, rtc.horizon);
    let methods = vec![
        ok(Method::new("rtc", MethodKind::Rtc, &oracle, &PayloadSpec::default(), Schedule::default()))?,
        ok(Method::new("naive", MethodKind::Naive, &oracle, &PayloadSpec::default(), Schedule::default()))?,
    ];
    let run = ok(run_benchmark(&methods, &tasks, 3, 10, &rtc, &SimParams::default(), "acceptance".into()))?;
    let dir = ok(tempfile::tempdir())?;
    ok(write_run(dir.path(), &run))?;
    let again = ok(report_from_dir(dir.path()))?;
    let stored_table = ok(fs::read_to_string(dir.path().join("report.txt")))?;
    let stored_csv = ok(fs::read_to_string(dir.path().join("report.csv")))?;
    ensure!(render_table(&again) == stored_table, "regenerated table differs");
    ensure!(render_csv(&again) == stored_csv, "regenerated csv differs");
    Ok(format!("rates {} / {}, regenerated report byte-identical", rates[0], rates[1]))
}

// ---------------------------------------------------------------- driver

const NAMES: [&str; 10] = [
    "dynamics fidelity",
    "gradient correctness",
    "guided-density oracle",
    "payload-confidence table",
    "rtc contract",
    "synthesis validity",
    "toy policy learning",
    "sag-compensation ablation",
    "synthetic-vs-nominal ablation",
    "reporting",
];

const LIMITS: [Option<u64>; 10] = [Some(1), Some(10), Some(30), None, None, None, None, None, None, None];

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |i: usize| selected.is_empty() || selected.contains(&i);
    panic::set_hook(Box::new(|_| {}));

    let mut recovery_policy = None;
    let mut failures = 0;
    for i in 1..=10 {
        if !wanted(i) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| match i {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6(),
            7 => criterion_7(&mut recovery_policy),
            8 => criterion_8(),
            9 => criterion_9(recovery_policy.take()),
            _ => criterion_10(),
        }))
        .unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        let outcome = match (outcome, LIMITS[i - 1]) {
            (Ok(_), Some(limit)) if secs >= limit as f64 => Err(format!("runtime {secs:.2} s over {limit} s")),
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {i:>2} {tag} {}: {detail} ({secs:.2} s)", NAMES[i - 1]);
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
