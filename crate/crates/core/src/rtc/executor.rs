use std::sync::mpsc;

use super::{plan_next_chunk, PlanOutput, PlanRequest, RtcConfig, RtcEvent, Termination, TickRecord, TrialLog};
use crate::error::{Error, Result};
use crate::guidance::GuidanceSpec;
use crate::policy::{actions_to_setpoints, clamp_row, ActionChunk, Observation, Setpoint, VelocityField};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// The world the executor drives.
pub trait SimBinding {
    /// State at the start of the current tick.
    fn observe(&mut self) -> Observation;

    /// Tracks `setpoint` for one execution period. An error aborts the trial;
    /// [`Error::RolloutAborted`] carries the taxonomy tag.
    fn apply(&mut self, setpoint: &Setpoint) -> Result<Flow>;
}

trait Planner {
    fn submit(&mut self, req: PlanRequest);
    fn collect(&mut self) -> Result<PlanOutput>;
}

struct Inline<'a, F: ?Sized> {
    field: &'a F,
    base: Option<&'a GuidanceSpec>,
    cfg: &'a RtcConfig,
    done: Option<Result<PlanOutput>>,
}

impl<F: VelocityField + ?Sized> Planner for Inline<'_, F> {
    fn submit(&mut self, req: PlanRequest) {
        self.done = Some(plan_next_chunk(self.field, self.base, &req, self.cfg));
    }

    fn collect(&mut self) -> Result<PlanOutput> {
        self.done.take().expect("collect follows submit")
    }
}

struct Threaded {
    requests: mpsc::Sender<PlanRequest>,
    results: mpsc::Receiver<Result<PlanOutput>>,
}

impl Planner for Threaded {
    fn submit(&mut self, req: PlanRequest) {
        // A closed channel surfaces as an error in `collect`.
        let _ = self.requests.send(req);
    }

    fn collect(&mut self) -> Result<PlanOutput> {
        self.results
            .recv()
            .map_err(|_| Error::invalid("planner thread exited"))?
    }
}

struct Committed {
    start_tick: usize,
    chunk: ActionChunk,
    setpoints: Vec<Setpoint>,
}

struct Pending {
    plan: usize,
    request_tick: usize,
    ready_tick: usize,
    seed: u64,
    anchor: (nalgebra::Vector3<f64>, f64),
}

fn setpoints_for(chunk: &ActionChunk, anchor: (nalgebra::Vector3<f64>, f64), dt: f64) -> Vec<Setpoint> {
    let mut clamped = chunk.clone();
    for t in 0..clamped.rows() {
        clamp_row(clamped.row_mut(t));
    }
    actions_to_setpoints(&clamped, anchor.0, anchor.1, dt)
}

fn abort_tag(e: &Error) -> String {
    match e {
        Error::RolloutAborted { tag, .. } => tag.to_string(),
        _ => "crash".to_string(),
    }
}

struct Schedule {
    delay: usize,
    latency: usize,
    period: usize,
}

fn run<P: Planner, B: SimBinding + ?Sized>(
    planner: &mut P,
    binding: &mut B,
    sched: Schedule,
    exec_dt: f64,
    seed: u64,
    max_ticks: usize,
) -> TrialLog {
    let mut records = Vec::new();
    let mut committed: Option<Committed> = None;
    let mut pending: Option<Pending> = None;
    let mut history: Vec<f64> = Vec::new();
    let mut last: Option<Setpoint> = None;
    let mut plans = 0usize;
    let mut next_request = 0usize;
    let mut termination = Termination::TickLimit;

    for tick in 0..max_ticks {
        let observation = binding.observe();
        let mut events = Vec::new();

        if pending.is_none() && tick >= next_request {
            let (prev_chunk, shift) = match &committed {
                Some(c) => (Some(c.chunk.clone()), tick - c.start_tick),
                None => (None, 0),
            };
            let plan_seed = rng::split(seed, plans as u64);
            planner.submit(PlanRequest {
                observation: observation.clone(),
                prev_chunk,
                shift,
                gripper_history: history.clone(),
                seed: plan_seed,
            });
            // The first chunk is planned blocking; nothing could execute meanwhile.
            let latency = if committed.is_some() { sched.latency } else { 0 };
            pending = Some(Pending {
                plan: plans,
                request_tick: tick,
                ready_tick: tick + latency,
                seed: plan_seed,
                anchor: (observation.position, observation.yaw),
            });
            plans += 1;
        }

        if let Some(p) = pending.as_ref() {
            if p.ready_tick == tick {
                let p = pending.take().expect("checked");
                match planner.collect() {
                    Ok(out) => {
                        if out.gap {
                            events.push(RtcEvent::Gap { plan: p.plan });
                        }
                        committed = Some(Committed {
                            start_tick: p.request_tick,
                            setpoints: setpoints_for(&out.chunk, p.anchor, exec_dt),
                            chunk: out.chunk.clone(),
                        });
                        events.push(RtcEvent::Planned {
                            plan: p.plan,
                            request_tick: p.request_tick,
                            seed: p.seed,
                            chunk: out.chunk,
                            skipped_guidance_steps: out.skipped_guidance_steps,
                        });
                        next_request = p.request_tick + sched.period;
                    }
                    Err(e) => {
                        termination = Termination::Aborted {
                            tag: "crash".into(),
                            message: e.to_string(),
                        };
                        break;
                    }
                }
            } else if tick == p.request_tick + sched.delay {
                events.push(RtcEvent::LateInference {
                    plan: p.plan,
                    request_tick: p.request_tick,
                });
            }
        }

        let queued = committed
            .as_ref()
            .and_then(|c| c.setpoints.get(tick - c.start_tick).copied());
        let setpoint = match queued {
            Some(sp) => sp,
            None => {
                events.push(RtcEvent::Starvation);
                let hold = last.map(|s| Setpoint {
                    velocity: nalgebra::Vector3::zeros(),
                    ..s
                });
                hold.unwrap_or(Setpoint {
                    position: observation.position,
                    yaw: observation.yaw,
                    gripper: history.last().copied().unwrap_or(-1.0),
                    velocity: nalgebra::Vector3::zeros(),
                })
            }
        };
        history.push(setpoint.gripper);
        last = Some(setpoint);
        records.push(TickRecord {
            tick,
            t: tick as f64 * exec_dt,
            observation,
            setpoint,
            events,
        });
        match binding.apply(&setpoint) {
            Ok(Flow::Continue) => {}
            Ok(Flow::Stop) => {
                termination = Termination::Completed;
                break;
            }
            Err(e) => {
                termination = Termination::Aborted {
                    tag: abort_tag(&e),
                    message: e.to_string(),
                };
                break;
            }
        }
    }
    TrialLog { records, termination }
}

fn checked<F: VelocityField + ?Sized>(field: &F, base: Option<&GuidanceSpec>, cfg: &RtcConfig) -> Result<()> {
    cfg.validate()?;
    if field.shape().0 != cfg.horizon {
        return Err(Error::invalid(format!(
            "field horizon {} differs from the configured {}",
            field.shape().0,
            cfg.horizon
        )));
    }
    if let Some(g) = base {
        g.validate()?;
    }
    Ok(())
}

/// Runs the asynchronous chunk executor for at most `max_ticks` ticks.
///
/// Plan `k` is sampled with seed `split(seed, k)`. A plan requested at tick
/// `r` is installed at tick `r + latency`; requests recur every `period`
/// ticks after the previous request. Plans are computed inline, so the log
/// depends only on the inputs.
pub fn execute_loop<F: VelocityField + ?Sized, B: SimBinding + ?Sized>(
    field: &F,
    guidance: Option<&GuidanceSpec>,
    binding: &mut B,
    cfg: &RtcConfig,
    seed: u64,
    max_ticks: usize,
) -> Result<TrialLog> {
    checked(field, guidance, cfg)?;
    let mut planner = Inline {
        field,
        base: guidance,
        cfg,
        done: None,
    };
    let sched = Schedule {
        delay: cfg.delay,
        latency: cfg.latency(),
        period: cfg.period(),
    };
    Ok(run(&mut planner, binding, sched, cfg.exec_dt, seed, max_ticks))
}

/// [`execute_loop`] with planning on a worker thread. The executor keeps
/// emitting while a plan is in flight and only waits for it at its modeled
/// completion tick, so the log is identical to the inline run.
pub fn execute_loop_threaded<F: VelocityField + ?Sized, B: SimBinding + ?Sized>(
    field: &F,
    guidance: Option<&GuidanceSpec>,
    binding: &mut B,
    cfg: &RtcConfig,
    seed: u64,
    max_ticks: usize,
) -> Result<TrialLog> {
    checked(field, guidance, cfg)?;
    let sched = Schedule {
        delay: cfg.delay,
        latency: cfg.latency(),
        period: cfg.period(),
    };
    std::thread::scope(|scope| {
        let (req_tx, req_rx) = mpsc::channel::<PlanRequest>();
        let (out_tx, out_rx) = mpsc::channel();
        scope.spawn(move || {
            for req in req_rx {
                if out_tx.send(plan_next_chunk(field, guidance, &req, cfg)).is_err() {
                    break;
                }
            }
        });
        let mut planner = Threaded {
            requests: req_tx,
            results: out_rx,
        };
        Ok(run(&mut planner, binding, sched, cfg.exec_dt, seed, max_ticks))
    })
}

/// Blocking chunk-at-a-time execution: a chunk is sampled at every chunk
/// boundary with no simulated latency and executed in full before the next
/// one. No continuity guidance is applied.
pub fn execute_naive<F: VelocityField + ?Sized, B: SimBinding + ?Sized>(
    field: &F,
    guidance: Option<&GuidanceSpec>,
    binding: &mut B,
    cfg: &RtcConfig,
    seed: u64,
    max_ticks: usize,
) -> Result<TrialLog> {
    let naive = RtcConfig {
        delay: 0,
        latency: Some(0),
        period: Some(cfg.horizon),
        ..cfg.clone()
    };
    checked(field, guidance, &naive)?;
    let h = cfg.horizon;
    let mut records = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut setpoints: Vec<Setpoint> = Vec::new();
    let mut termination = Termination::TickLimit;
    for tick in 0..max_ticks {
        let observation = binding.observe();
        let mut events = Vec::new();
        if tick % h == 0 {
            let plan = tick / h;
            let plan_seed = rng::split(seed, plan as u64);
            let req = PlanRequest {
                observation: observation.clone(),
                prev_chunk: None,
                shift: 0,
                gripper_history: history.clone(),
                seed: plan_seed,
            };
            match plan_next_chunk(field, guidance, &req, &naive) {
                Ok(out) => {
                    setpoints = setpoints_for(&out.chunk, (observation.position, observation.yaw), cfg.exec_dt);
                    events.push(RtcEvent::Planned {
                        plan,
                        request_tick: tick,
                        seed: plan_seed,
                        chunk: out.chunk,
                        skipped_guidance_steps: out.skipped_guidance_steps,
                    });
                }
                Err(e) => {
                    termination = Termination::Aborted {
                        tag: "crash".into(),
                        message: e.to_string(),
                    };
                    break;
                }
            }
        }
        let setpoint = setpoints[tick % h];
        history.push(setpoint.gripper);
        records.push(TickRecord {
            tick,
            t: tick as f64 * cfg.exec_dt,
            observation,
            setpoint,
            events,
        });
        match binding.apply(&setpoint) {
            Ok(Flow::Continue) => {}
            Ok(Flow::Stop) => {
                termination = Termination::Completed;
                break;
            }
            Err(e) => {
                termination = Termination::Aborted {
                    tag: abort_tag(&e),
                    message: e.to_string(),
                };
                break;
            }
        }
    }
    Ok(TrialLog { records, termination })
}
