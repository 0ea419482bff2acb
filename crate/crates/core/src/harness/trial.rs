use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Stage, TaskSpec};
use crate::dynamics::{ControllerGains, DroneParams, DroneState, MassModel, PoseTarget};
use crate::error::{Error, Result};
use crate::guidance::GuidanceSpec;
use crate::policy::{Observation, Setpoint, VelocityField};
use crate::rng;
use crate::rtc::{execute_loop, execute_naive, Flow, RtcConfig, RtcEvent, SimBinding, Termination, TrialLog};
use crate::synth::{TaskKind, World, WorldConfig, WorldEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureTag {
    None,
    MissedGrasp,
    DropAfterGrasp,
    Crash,
    BypassedGate,
    NoHover,
    WrongOrder,
    Starvation,
    Timeout,
}

impl FailureTag {
    pub const ALL: [FailureTag; 9] = [
        FailureTag::None,
        FailureTag::MissedGrasp,
        FailureTag::DropAfterGrasp,
        FailureTag::Crash,
        FailureTag::BypassedGate,
        FailureTag::NoHover,
        FailureTag::WrongOrder,
        FailureTag::Starvation,
        FailureTag::Timeout,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureTag::None => "none",
            FailureTag::MissedGrasp => "missed_grasp",
            FailureTag::DropAfterGrasp => "drop_after_grasp",
            FailureTag::Crash => "crash",
            FailureTag::BypassedGate => "bypassed_gate",
            FailureTag::NoHover => "no_hover",
            FailureTag::WrongOrder => "wrong_order",
            FailureTag::Starvation => "starvation",
            FailureTag::Timeout => "timeout",
        }
    }
}

impl std::fmt::Display for FailureTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Simulation time at which each stage succeeded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub gate: Option<f64>,
    pub hover: Option<f64>,
    pub pick: Option<f64>,
    pub place: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub kind: TaskKind,
    pub gate: bool,
    pub hover: bool,
    pub pick: bool,
    pub place: bool,
    pub failure: FailureTag,
    pub times: StageTimes,
    /// Largest altitude error from the grasp altitude while holding, meters.
    pub sag: Option<f64>,
    /// Simulated time at the end of the trial.
    pub duration: f64,
}

impl TrialResult {
    pub fn passed(&self, stage: Stage) -> bool {
        match stage {
            Stage::Gate => self.gate,
            Stage::Hover => self.hover,
            Stage::Pick => self.pick,
            Stage::Place => self.place,
        }
    }

    /// Stage monotonicity, flags outside the rubric unset, and the tag
    /// consistent with the flags.
    pub fn validate(&self) -> Result<()> {
        let list = super::stages(self.kind);
        let mut prior = true;
        for s in list {
            if self.passed(*s) && !prior {
                return Err(Error::invalid(format!("stage {s} passed without its prerequisite")));
            }
            prior = self.passed(*s);
        }
        let all = [Stage::Gate, Stage::Hover, Stage::Pick, Stage::Place];
        if all.iter().any(|s| self.passed(*s) && !list.contains(s)) {
            return Err(Error::invalid("stage flag set outside the task rubric"));
        }
        let complete = list.iter().all(|s| self.passed(*s));
        if complete != (self.failure == FailureTag::None) {
            return Err(Error::invalid("failure tag disagrees with the stage flags"));
        }
        if self.failure == FailureTag::WrongOrder && self.kind != TaskKind::Compositional {
            return Err(Error::invalid("wrong_order outside a compositional task"));
        }
        Ok(())
    }
}

/// Simulator parameters shared by every trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub drone: DroneParams,
    pub gains: ControllerGains,
    pub world: WorldConfig,
}

/// How chunks are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Executor {
    /// Blocking chunk-at-a-time execution.
    Naive,
    /// Real-time chunking with the configured delay and period.
    Rtc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub result: TrialResult,
    pub log: TrialLog,
}

/// Per-trial draws: start pose and object position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialInit {
    pub start: Vector3<f64>,
    pub yaw: f64,
    pub object: Vector3<f64>,
}

impl TrialInit {
    /// Draws from `split(seed, 0)`; the executor uses `split(seed, 1)`.
    pub fn draw(task: &TaskSpec, seed: u64) -> Self {
        let mut r = rng::rng(rng::split(seed, 0));
        let mut sym = |h: f64| if h > 0.0 { r.random_range(-h..=h) } else { 0.0 };
        let dp = Vector3::new(sym(task.start_box[0]), sym(task.start_box[1]), sym(task.start_box[2]));
        let yaw = sym(task.start_yaw);
        let dobj = Vector3::new(sym(task.object_box[0]), sym(task.object_box[1]), sym(task.object_box[2]));
        TrialInit {
            start: task.scene.start + dp,
            yaw: task.scene.start_yaw + yaw,
            object: task.scene.object + dobj,
        }
    }
}

/// Stage detectors, updated every simulation step.
#[derive(Debug, Clone)]
struct Tracker {
    kind: TaskKind,
    hover_point: Vector3<f64>,
    object_z: f64,
    times: StageTimes,
    hover_since: Option<f64>,
    bypassed: bool,
    close_attempted: bool,
    dropped: bool,
    wrong_order: bool,
    early_grasp: bool,
    crashed: bool,
    sag: Option<f64>,
}

impl Tracker {
    fn new(task: &TaskSpec, object: &Vector3<f64>) -> Self {
        Tracker {
            kind: task.kind,
            hover_point: task.hover_point(object),
            object_z: object.z,
            times: StageTimes::default(),
            hover_since: None,
            bypassed: false,
            close_attempted: false,
            dropped: false,
            wrong_order: false,
            early_grasp: false,
            crashed: false,
            sag: None,
        }
    }

    fn hover_ready(&self) -> bool {
        match self.kind {
            TaskKind::GateNav | TaskKind::Compositional => self.times.gate.is_some() && self.times.hover.is_none(),
            TaskKind::PickPlace => false,
        }
    }

    fn pick_ready(&self) -> bool {
        match self.kind {
            TaskKind::PickPlace => true,
            TaskKind::Compositional => self.times.hover.is_some(),
            TaskKind::GateNav => false,
        }
    }

    fn step(&mut self, task: &TaskSpec, prev: &Vector3<f64>, world: &World, events: &[WorldEvent]) {
        let p = world.state().position;
        let t = world.t();
        let gate = &task.scene.gate;
        if self.kind.traverses_gate() && self.times.gate.is_none() {
            if let Some(c) = gate.crossing(prev, &p, 0.0) {
                if gate.signed_distance(prev) < 0.0 {
                    if c.inside {
                        self.times.gate = Some(t);
                    } else {
                        self.bypassed = true;
                    }
                }
            }
        }
        if self.hover_ready() {
            if (p - self.hover_point).norm() <= task.stages.hover_radius {
                let since = *self.hover_since.get_or_insert(t);
                if t - since >= task.stages.hover_duration - 1e-9 {
                    self.times.hover = Some(t);
                }
            } else {
                self.hover_since = None;
            }
        }
        for e in events {
            match *e {
                WorldEvent::Grasp { t, .. } => {
                    if self.kind == TaskKind::Compositional && self.times.gate.is_none() {
                        self.wrong_order = true;
                    } else if self.pick_ready() {
                        self.times.pick = Some(t);
                    } else if self.kind == TaskKind::Compositional {
                        self.early_grasp = true;
                    }
                }
                WorldEvent::CloseAway { .. } => {
                    self.close_attempted = true;
                    if self.kind == TaskKind::Compositional && self.times.gate.is_none() {
                        self.wrong_order = true;
                    }
                }
                WorldEvent::Release { t, position } => {
                    if self.times.pick.is_some() && self.times.place.is_none() {
                        if task.scene.bin.contains_release(&position) {
                            self.times.place = Some(t);
                        } else {
                            self.dropped = true;
                        }
                    }
                }
                WorldEvent::Crash { .. } => self.crashed = true,
            }
        }
        if world.holding() && self.times.pick.is_some() {
            let err = (p.z - self.object_z).abs();
            self.sag = Some(self.sag.map_or(err, |s: f64| s.max(err)));
        }
    }

    fn finished(&self) -> bool {
        let last = match self.kind {
            TaskKind::GateNav => self.times.hover,
            TaskKind::PickPlace | TaskKind::Compositional => self.times.place,
        };
        last.is_some() || self.dropped || self.wrong_order || self.early_grasp
    }

    fn result(&self, log: &TrialLog, duration: f64) -> TrialResult {
        let list = super::stages(self.kind);
        let passed = |s: Stage| {
            list.contains(&s)
                && match s {
                    Stage::Gate => self.times.gate.is_some(),
                    Stage::Hover => self.times.hover.is_some(),
                    Stage::Pick => self.times.pick.is_some(),
                    Stage::Place => self.times.place.is_some(),
                }
        };
        let first_failed = list.iter().copied().find(|s| !passed(*s));
        let starved = log.count_events(|e| matches!(e, RtcEvent::Starvation)) > 0;
        let waited = if starved { FailureTag::Starvation } else { FailureTag::Timeout };
        let aborted = matches!(log.termination, Termination::Aborted { .. });
        let failure = match first_failed {
            None => FailureTag::None,
            Some(_) if self.crashed || aborted => FailureTag::Crash,
            Some(_) if self.wrong_order => FailureTag::WrongOrder,
            Some(Stage::Gate) if self.bypassed => FailureTag::BypassedGate,
            Some(Stage::Hover) => FailureTag::NoHover,
            Some(Stage::Pick) if self.close_attempted || self.early_grasp => FailureTag::MissedGrasp,
            Some(Stage::Place) if self.dropped => FailureTag::DropAfterGrasp,
            Some(_) => waited,
        };
        TrialResult {
            kind: self.kind,
            gate: passed(Stage::Gate),
            hover: passed(Stage::Hover),
            pick: passed(Stage::Pick),
            place: passed(Stage::Place),
            failure,
            times: StageTimes {
                gate: self.times.gate.filter(|_| passed(Stage::Gate)),
                hover: self.times.hover.filter(|_| passed(Stage::Hover)),
                pick: self.times.pick.filter(|_| passed(Stage::Pick)),
                place: self.times.place.filter(|_| passed(Stage::Place)),
            },
            sag: self.sag,
            duration,
        }
    }
}

/// World plus stage detectors, driven by the chunk executor.
struct TrialBinding<'a> {
    task: &'a TaskSpec,
    world: World,
    tracker: Tracker,
    steps_per_tick: usize,
    events: Vec<WorldEvent>,
}

impl TrialBinding<'_> {
    fn goal(&self) -> Vector3<f64> {
        let aperture = self.world.vehicle.gripper.aperture;
        match self.task.kind {
            TaskKind::GateNav => self.tracker.hover_point,
            _ if aperture <= 0.5 => self.task.bin_point(),
            _ => self.world.object,
        }
    }
}

impl SimBinding for TrialBinding<'_> {
    fn observe(&mut self) -> Observation {
        let s = self.world.state();
        let mut o = Observation::new(
            s.position,
            s.yaw(),
            self.world.vehicle.gripper.aperture,
            self.goal(),
            self.task.token(),
        );
        o.payload_attached_truth = self.world.holding();
        o
    }

    fn apply(&mut self, sp: &Setpoint) -> Result<Flow> {
        let target = PoseTarget::new(sp.position, sp.yaw).with_velocity(sp.velocity);
        for _ in 0..self.steps_per_tick {
            let prev = self.world.state().position;
            self.events.clear();
            self.world.step(&target, sp.gripper, &mut self.events)?;
            self.tracker.step(self.task, &prev, &self.world, &self.events);
            if self.tracker.crashed {
                return Err(Error::RolloutAborted {
                    t: self.world.t(),
                    tag: "crash",
                });
            }
            if self.tracker.finished() {
                return Ok(Flow::Stop);
            }
        }
        Ok(Flow::Continue)
    }
}

/// Runs one closed-loop trial of `task` and scores it against the rubric.
///
/// The vehicle starts at rest from the drawn start pose and flies with the
/// payload-unaware controller, so a grasp causes sag. The trial ends when
/// the last stage succeeds, on a crash, a drop, a wrong-order grasp, or at
/// the task time limit.
#[allow(clippy::too_many_arguments)]
pub fn run_trial<F: VelocityField + ?Sized>(
    field: &F,
    guidance: Option<&GuidanceSpec>,
    rtc: &RtcConfig,
    executor: Executor,
    task: &TaskSpec,
    params: &SimParams,
    seed: u64,
) -> Result<Trial> {
    task.validate()?;
    let init = TrialInit::draw(task, seed);
    let world_cfg = WorldConfig {
        payload_ratio: task.payload_ratio,
        grasp_radius: task.stages.grasp_radius,
        ..params.world
    };
    let steps = rtc.exec_dt / world_cfg.sim_dt;
    if (steps - steps.round()).abs() > 1e-9 || steps < 1.0 {
        return Err(Error::invalid("execution period must be a multiple of the simulation step"));
    }
    let world = World::new(
        task.scene.clone(),
        init.object,
        DroneState::with_yaw(init.start, init.yaw),
        params.drone,
        params.gains,
        MassModel::Nominal,
        world_cfg,
    );
    let mut binding = TrialBinding {
        task,
        tracker: Tracker::new(task, &init.object),
        world,
        steps_per_tick: steps.round() as usize,
        events: Vec::new(),
    };
    let max_ticks = (task.time_limit / rtc.exec_dt).ceil() as usize;
    let exec_seed = rng::split(seed, 1);
    let log = match executor {
        Executor::Naive => execute_naive(field, guidance, &mut binding, rtc, exec_seed, max_ticks)?,
        Executor::Rtc => execute_loop(field, guidance, &mut binding, rtc, exec_seed, max_ticks)?,
    };
    let result = binding.tracker.result(&log, binding.world.t());
    Ok(Trial { result, log })
}
