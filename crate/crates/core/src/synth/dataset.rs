use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{
    build_plan_from, draw_nominal, track_plan, ExpertConfig, ExpertRollout, RandomizationConfig, Scene, TaskKind,
    WaypointPlan, WorldConfig,
};
use crate::dynamics::{wrap_angle, ControllerGains, DroneParams};
use crate::error::{Error, Result};
use crate::policy::{ActionChunk, Observation, TaskToken, ACTION_DIM, DX, DY, DYAW, DZ, GRIPPER};
use crate::rng;

/// Stream offset for nominal-draw seeds: group `j` uses
/// `split(master, NOMINAL_STREAM + j)`.
pub const NOMINAL_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub randomization: RandomizationConfig,
    pub expert: ExpertConfig,
    pub world: WorldConfig,
    /// Chunk horizon of the emitted dataset.
    pub horizon: usize,
    /// Anchor stride; defaults to half the horizon.
    pub stride: Option<usize>,
    pub exec_dt: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            randomization: RandomizationConfig::default(),
            expert: ExpertConfig::default(),
            world: WorldConfig::default(),
            horizon: 25,
            stride: None,
            exec_dt: 0.1,
        }
    }
}

impl SynthConfig {
    pub fn stride(&self) -> usize {
        self.stride.unwrap_or((self.horizon / 2).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        self.randomization.validate()?;
        let ratio = self.exec_dt / self.world.sim_dt;
        if self.horizon == 0 || self.stride() == 0 || (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
            return Err(Error::invalid("horizon, stride and exec_dt / sim_dt must be positive integers"));
        }
        Ok(())
    }
}

/// One training pair as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub scene_id: String,
    pub task_token: TaskToken,
    /// Rollout seed.
    pub seed: u64,
    pub observation: Observation,
    pub chunk: ActionChunk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RolloutStatus {
    Kept {
        chunks: usize,
        duration: f64,
        min_frame_distance: f64,
        min_thrust: f64,
        max_thrust: f64,
        max_body_rate: f64,
    },
    Discarded {
        reason: String,
    },
}

/// Per-rollout manifest line: the plan with its random draws and the scan
/// results of the rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutSummary {
    pub index: usize,
    pub seed: u64,
    pub plan: Option<WaypointPlan>,
    #[serde(flatten)]
    pub status: RolloutStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
    pub rollouts: Vec<RolloutSummary>,
}

impl Dataset {
    pub fn pairs(&self) -> Vec<(Observation, ActionChunk)> {
        self.records.iter().map(|r| (r.observation.clone(), r.chunk.clone())).collect()
    }
}

/// Resamples a rollout every `exec_dt` and cuts it into chunks.
///
/// With resampled poses `p_k`, the chunk anchored at `a` has rows
/// `(p_{a+t+1} - p_{a+t}, wrap(yaw_{a+t+1} - yaw_{a+t}), u_{a+t+1})`,
/// `t < h`, where `u` is the gripper command. The observation is the state
/// at `a` with the goal the plan shows for the aperture at `a`. Anchors step
/// by `stride`, giving `floor((T / exec_dt - h) / stride) + 1` chunks.
pub fn actions_from_states(
    rollout: &ExpertRollout,
    plan: &WaypointPlan,
    sim_dt: f64,
    exec_dt: f64,
    h: usize,
    stride: usize,
) -> Vec<(Observation, ActionChunk)> {
    let every = (exec_dt / sim_dt).round() as usize;
    let resampled: Vec<_> = rollout.samples.iter().step_by(every).collect();
    if resampled.len() <= h {
        return Vec::new();
    }
    let last_anchor = resampled.len() - 1 - h;
    (0..=last_anchor)
        .step_by(stride)
        .map(|a| {
            let s = resampled[a];
            let obs = Observation::new(
                s.state.position,
                s.state.yaw(),
                s.aperture,
                plan.goal_for(s.aperture),
                plan.task_token,
            );
            let chunk = ActionChunk::from_fn(h, ACTION_DIM, |t, d| {
                let (p0, p1) = (resampled[a + t], resampled[a + t + 1]);
                match d {
                    DX | DY | DZ => p1.state.position[d] - p0.state.position[d],
                    DYAW => wrap_angle(p1.state.yaw() - p0.state.yaw()),
                    GRIPPER => p1.gripper_command,
                    _ => unreachable!(),
                }
            });
            (obs, chunk)
        })
        .collect()
}

fn rollout_one(
    scene: &Scene,
    task: TaskKind,
    cfg: &SynthConfig,
    params: &DroneParams,
    gains: &ControllerGains,
    master: u64,
    index: usize,
) -> (RolloutSummary, Vec<DatasetRecord>) {
    let group = (index / cfg.randomization.n_s) as u64;
    let nominal = draw_nominal(task, &cfg.randomization, &mut rng::rng(rng::split(master, NOMINAL_STREAM + group)));
    let seed = rng::split(master, index as u64);
    let discarded = |plan, reason: String| {
        log::info!("rollout {index} discarded: {reason}");
        (
            RolloutSummary {
                index,
                seed,
                plan,
                status: RolloutStatus::Discarded { reason },
            },
            Vec::new(),
        )
    };
    let plan = match build_plan_from(scene, task, &nominal, &mut rng::rng(seed), &cfg.randomization) {
        Ok(p) => p,
        Err(e) => return discarded(None, e.to_string()),
    };
    let rollout = match track_plan(&plan, scene, params, gains, &cfg.world, &cfg.expert) {
        Ok(r) => r,
        Err(e) => return discarded(Some(plan), e.to_string()),
    };
    let pairs = actions_from_states(&rollout, &plan, cfg.world.sim_dt, cfg.exec_dt, cfg.horizon, cfg.stride());
    if pairs.is_empty() {
        return discarded(Some(plan), "rollout shorter than one chunk".into());
    }
    let records = pairs
        .into_iter()
        .map(|(observation, chunk)| DatasetRecord {
            scene_id: scene.id.clone(),
            task_token: plan.task_token,
            seed,
            observation,
            chunk,
        })
        .collect::<Vec<_>>();
    let summary = RolloutSummary {
        index,
        seed,
        status: RolloutStatus::Kept {
            chunks: records.len(),
            duration: rollout.duration(),
            min_frame_distance: rollout.min_frame_distance,
            min_thrust: rollout.min_thrust(),
            max_thrust: rollout.max_thrust(),
            max_body_rate: rollout.max_body_rate(),
        },
        plan: Some(plan),
    };
    (summary, records)
}

/// Synthesizes `n` expert rollouts of `task` in `scene`.
///
/// Rollout `i` uses seed `split(master, i)` for its perturbation and shares
/// the nominal draw of group `i / n_s`. Records are emitted in rollout
/// order whatever the number of worker threads.
pub fn generate_dataset(
    scene: &Scene,
    task: TaskKind,
    cfg: &SynthConfig,
    params: &DroneParams,
    gains: &ControllerGains,
    n: usize,
    master: u64,
) -> Result<Dataset> {
    cfg.validate()?;
    scene.validate()?;
    let one = |i| rollout_one(scene, task, cfg, params, gains, master, i);
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = (0..n).map(one).collect();
    let mut records = Vec::new();
    let mut rollouts = Vec::with_capacity(n);
    for (summary, recs) in results {
        rollouts.push(summary);
        records.extend(recs);
    }
    Ok(Dataset { records, rollouts })
}

/// Findings of [`validate_dataset`]; empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Validation {
    pub errors: Vec<String>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

fn within(v: f64, half: f64) -> bool {
    v.abs() <= half + 1e-12
}

/// Checks supports of every recorded draw, collision clearance and control
/// feasibility of every kept rollout, and shape/finiteness of every record.
pub fn validate_dataset(dataset: &Dataset, cfg: &SynthConfig, params: &DroneParams) -> Validation {
    let r = &cfg.randomization;
    let mut errors = Vec::new();
    let mut kept = std::collections::BTreeSet::new();
    for s in &dataset.rollouts {
        let tag = format!("rollout {}", s.index);
        if let Some(plan) = &s.plan {
            let nd = &plan.nominal;
            if !(nd.h >= r.h_range[0] - 1e-12 && nd.h <= r.h_range[1] + 1e-12) {
                errors.push(format!("{tag}: h = {} outside {:?}", nd.h, r.h_range));
            }
            if nd.after_gate_offset.norm() > r.after_gate_radius + 1e-12 {
                errors.push(format!("{tag}: after-gate offset {} beyond radius", nd.after_gate_offset.norm()));
            }
            let p = &plan.perturbation;
            let in_box = |v: &nalgebra::Vector3<f64>, half: &[f64; 3]| (0..3).all(|i| within(v[i], half[i]));
            if !in_box(&p.start_offset, &r.start_position)
                || !in_box(&p.start_velocity, &r.start_velocity)
                || !within(p.start_yaw_offset, r.start_yaw)
            {
                errors.push(format!("{tag}: start perturbation outside its box"));
            }
            if !in_box(&nd.object_offset, &r.object_box) || !within(p.release_dz, r.release_jitter) {
                errors.push(format!("{tag}: object or release draw outside its box"));
            }
        }
        if let RolloutStatus::Kept {
            min_frame_distance,
            min_thrust,
            max_thrust,
            max_body_rate,
            ..
        } = s.status
        {
            kept.insert(s.seed);
            if !(min_frame_distance >= cfg.expert.safety_radius) {
                errors.push(format!("{tag}: frame distance {min_frame_distance} below safety radius"));
            }
            if !(min_thrust >= 0.0 && max_thrust <= 1.0) {
                errors.push(format!("{tag}: thrust outside [0, 1]"));
            }
            if !(max_body_rate <= params.max_body_rate + 1e-9) {
                errors.push(format!("{tag}: body rate {max_body_rate} above limit"));
            }
        }
    }
    for (i, rec) in dataset.records.iter().enumerate() {
        if rec.chunk.shape() != (cfg.horizon, ACTION_DIM) || !rec.chunk.is_finite() {
            errors.push(format!("record {i}: bad chunk"));
        }
        if let Err(e) = rec.observation.validate() {
            errors.push(format!("record {i}: {e}"));
        }
        if rec.observation.task_token != rec.task_token {
            errors.push(format!("record {i}: task token mismatch"));
        }
        if !dataset.rollouts.is_empty() && !kept.contains(&rec.seed) {
            errors.push(format!("record {i}: seed {} has no kept rollout", rec.seed));
        }
    }
    Validation { errors }
}

fn write_lines<T: Serialize, W: Write>(items: &[T], mut w: W) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read_lines<T: for<'de> Deserialize<'de>, R: BufRead>(r: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::invalid(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

/// Dataset file: one [`DatasetRecord`] per line.
pub fn write_dataset<W: Write>(records: &[DatasetRecord], w: W) -> Result<()> {
    write_lines(records, w)
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<Vec<DatasetRecord>> {
    read_lines(r)
}

/// Manifest file: one [`RolloutSummary`] per line.
pub fn write_manifest<W: Write>(rollouts: &[RolloutSummary], w: W) -> Result<()> {
    write_lines(rollouts, w)
}

pub fn read_manifest<R: BufRead>(r: R) -> Result<Vec<RolloutSummary>> {
    read_lines(r)
}
