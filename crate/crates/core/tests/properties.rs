use std::io::BufReader;

use nalgebra::Vector3;
use proptest::prelude::*;

use airchunk::guidance::{payload_confidence, payload_potential, tracking_gradient, tracking_potential, PayloadSpec, TrackingSpec};
use airchunk::harness::{stage_counts, stages, FailureTag, StageTimes, TrialResult};
use airchunk::policy::{
    read_checkpoint, write_checkpoint, ActionChunk, GaussianField, MlpArch, MlpField, Observation, Setpoint,
    TaskToken, ACTION_DIM,
};
use airchunk::rtc::{execute_loop, plan_next_chunk, soft_mask, Flow, PlanRequest, RtcConfig, SimBinding};
use airchunk::synth::{read_dataset, write_dataset, DatasetRecord, TaskKind};

const H: usize = 25;

fn chunk(scale: f64) -> impl Strategy<Value = ActionChunk> {
    prop::collection::vec(-scale..scale, H * ACTION_DIM).prop_map(|v| ActionChunk::from_vec(H, ACTION_DIM, v).unwrap())
}

fn obs_at(z: f64, aperture: f64) -> Observation {
    Observation::new(Vector3::new(1.0, 0.0, z), 0.0, aperture, Vector3::new(3.0, 0.0, 1.0), TaskToken::PICK_PLACE)
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
    let norm = |c: &ActionChunk| c.dot(c).sqrt();
    let mut diff = numeric.clone();
    diff.axpy(-1.0, analytic);
    norm(&diff) / norm(analytic).max(1e-12)
}

fn result_from_flags(kind: TaskKind, flags: [bool; 4]) -> TrialResult {
    let [gate, hover, pick, place] = flags;
    let mut r = TrialResult {
        kind,
        gate,
        hover,
        pick,
        place,
        failure: FailureTag::Timeout,
        times: StageTimes::default(),
        sag: None,
        duration: 1.0,
    };
    if stages(kind).iter().all(|s| r.passed(*s)) {
        r.failure = FailureTag::None;
    }
    r
}

struct Idle {
    obs: Observation,
}

impl SimBinding for Idle {
    fn observe(&mut self) -> Observation {
        self.obs.clone()
    }

    fn apply(&mut self, _: &Setpoint) -> airchunk::Result<Flow> {
        Ok(Flow::Continue)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn alpha_is_bounded(commands in prop::collection::vec(-1.0..=1.0f64, 0..8), g in -0.5..1.5f64) {
        let c = payload_confidence(&commands, g, &PayloadSpec::default());
        for v in [c.c_intent, c.o_intent, c.c_meas, c.o_meas, c.o_flag, c.alpha] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(c.aperture_clipped, !(0.0..=1.0).contains(&g));
    }

    #[test]
    fn alpha_falls_with_aperture_and_rises_with_closing(
        commands in prop::collection::vec(-1.0..=1.0f64, 4),
        g in 0.0..1.0f64,
        dg in 0.0..0.5f64,
        i in 0usize..4,
        du in 0.0..1.0f64,
    ) {
        let spec = PayloadSpec::default();
        let base = payload_confidence(&commands, g, &spec).alpha;
        prop_assert!(payload_confidence(&commands, (g + dg).min(1.0), &spec).alpha <= base + 1e-12);
        let mut closer = commands.clone();
        closer[i] = (closer[i] + du).min(1.0);
        prop_assert!(payload_confidence(&closer, g, &spec).alpha >= base - 1e-12);
    }

    #[test]
    fn potentials_are_non_negative(a in chunk(0.5), des in chunk(0.5), z in 0.2..2.0f64, g in 0.0..1.0f64) {
        let spec = TrackingSpec::new(des, vec![1.0, 0.5, 2.0, 0.1, 0.0], soft_mask(H, 4, 0.5)).unwrap();
        prop_assert!(tracking_potential(&a, &spec) >= 0.0);
        let (value, _) = payload_potential(&a, &obs_at(z, g), &[1.0; 4], &PayloadSpec::default());
        prop_assert!(value >= 0.0);
    }

    #[test]
    fn tracking_gradient_matches_finite_differences(a in chunk(0.5), des in chunk(0.5), w in prop::collection::vec(0.0..2.0f64, H)) {
        let spec = TrackingSpec::new(des, vec![1.0, 0.5, 2.0, 0.1, 3.0], w).unwrap();
        let numeric = central_difference(|c| tracking_potential(c, &spec), &a);
        prop_assert!(relative_error(&numeric, &tracking_gradient(&a, &spec)) < 1e-6);
    }

    #[test]
    fn payload_gradient_matches_finite_differences(a in chunk(0.5), z in 0.2..2.0f64, gamma in 0.0..3.0f64) {
        let spec = PayloadSpec { gamma, ..PayloadSpec::default() };
        let obs = obs_at(z, 0.0);
        let (_, analytic) = payload_potential(&a, &obs, &[1.0; 4], &spec);
        let numeric = central_difference(|c| payload_potential(c, &obs, &[1.0; 4], &spec).0, &a);
        prop_assert!(relative_error(&numeric, &analytic) < 1e-6);
    }

    #[test]
    fn mask_shape(h in 1usize..60, b_frac in 0.0..=1.0f64, decay in 0.01..=1.0f64) {
        let b = (b_frac * h as f64).floor() as usize;
        let w = soft_mask(h, b, decay);
        prop_assert_eq!(w.len(), h);
        prop_assert!(w[..b].iter().all(|&v| v == 1.0));
        prop_assert!(w.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(w.windows(2).all(|p| p[1] <= p[0]));
        if b < h {
            prop_assert_eq!(w[h - 1], 0.0);
            prop_assert!(w[b..].iter().all(|&v| v == 0.0 || v >= 0.01));
        }
    }

    #[test]
    fn frozen_prefix_copies_the_previous_chunk(prev in chunk(0.3), b in 0usize..8, shift in 0usize..12, seed in any::<u64>()) {
        let field = GaussianField::constant(ActionChunk::filled(H, ACTION_DIM, 0.05), vec![0.1; ACTION_DIM]).unwrap();
        let cfg = RtcConfig { delay: b, ..RtcConfig::default() };
        let req = PlanRequest {
            observation: obs_at(1.0, 1.0),
            prev_chunk: Some(prev.clone()),
            shift,
            gripper_history: vec![-1.0; 4],
            seed,
        };
        let out = plan_next_chunk(&field, None, &req, &cfg).unwrap();
        prop_assert!(!out.gap);
        let target = prev.shifted(shift);
        for t in 0..b {
            prop_assert_eq!(out.chunk.row(t), target.row(t));
        }
    }

    #[test]
    fn emission_is_live_for_latency_up_to_the_prefix(b in 0usize..10, lat_frac in 0.0..=1.0f64, seed in any::<u64>()) {
        let latency = (lat_frac * b as f64).floor() as usize;
        let field = GaussianField::constant(ActionChunk::filled(H, ACTION_DIM, 0.02), vec![0.05; ACTION_DIM]).unwrap();
        let cfg = RtcConfig { delay: b, latency: Some(latency), ..RtcConfig::default() };
        let mut sim = Idle { obs: obs_at(1.0, 1.0) };
        let log = execute_loop(&field, None, &mut sim, &cfg, seed, 90).unwrap();
        prop_assert_eq!(log.records.len(), 90);
        prop_assert!(log.validate().is_ok());
    }

    #[test]
    fn validate_accepts_exactly_monotone_stage_chains(k in 0usize..3, flags in any::<[bool; 4]>()) {
        let kind = TaskKind::ALL[k];
        let r = result_from_flags(kind, flags);
        let list = stages(kind);
        let chained = list.windows(2).all(|p| !r.passed(p[1]) || r.passed(p[0]));
        let in_rubric = [flags[0], flags[1], flags[2], flags[3]]
            .iter()
            .zip(["gate", "hover", "pick", "place"])
            .all(|(&f, name)| !f || list.iter().any(|s| s.as_str() == name));
        prop_assert_eq!(r.validate().is_ok(), chained && in_rubric);
    }

    #[test]
    fn stage_counts_are_monotone(k in 0usize..3, depths in prop::collection::vec(0usize..5, 0..40)) {
        let kind = TaskKind::ALL[k];
        let list = stages(kind);
        let results: Vec<TrialResult> = depths
            .iter()
            .map(|&d| {
                let mut flags = [false; 4];
                for s in list.iter().take(d) {
                    flags[["gate", "hover", "pick", "place"].iter().position(|n| *n == s.as_str()).unwrap()] = true;
                }
                result_from_flags(kind, flags)
            })
            .collect();
        let counts = stage_counts(kind, results.iter());
        prop_assert_eq!(counts[0].base, results.len());
        for p in counts.windows(2) {
            prop_assert!(p[1].successes <= p[0].successes);
            prop_assert_eq!(p[1].base, p[0].successes);
        }
        for c in &counts {
            if let Some(rate) = c.rate() {
                prop_assert_eq!((rate * c.base as f64 / 100.0).round() as usize, c.successes);
            }
        }
    }

    #[test]
    fn dataset_round_trip(
        chunks in prop::collection::vec(chunk(0.5), 1..4),
        seed in any::<u64>(),
        p in prop::array::uniform3(-5.0..5.0f64),
        g in 0.0..=1.0f64,
    ) {
        let records: Vec<DatasetRecord> = chunks
            .into_iter()
            .enumerate()
            .map(|(i, c)| DatasetRecord {
                scene_id: format!("scene-{i}"),
                task_token: TaskToken::GATE_NAV,
                seed: seed.wrapping_add(i as u64),
                observation: Observation::new(Vector3::from(p), 0.3 * i as f64, g, Vector3::new(1.0, 2.0, 3.0), TaskToken::GATE_NAV),
                chunk: c,
            })
            .collect();
        let mut buf = Vec::new();
        write_dataset(&records, &mut buf).unwrap();
        prop_assert_eq!(read_dataset(BufReader::new(&buf[..])).unwrap(), records);
    }

    #[test]
    fn checkpoint_round_trip(hidden in 1usize..12, seed in any::<u64>(), shift in prop::collection::vec(-1.0..1.0f64, ACTION_DIM)) {
        let arch = MlpArch::new(H, ACTION_DIM, hidden);
        let field = MlpField::init(arch, shift, vec![0.5; ACTION_DIM], 0.05, seed);
        let mut buf = Vec::new();
        write_checkpoint(&field, &mut buf).unwrap();
        prop_assert_eq!(read_checkpoint(&buf[..]).unwrap(), field);
    }
}
