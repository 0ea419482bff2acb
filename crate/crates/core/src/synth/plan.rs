use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GateGeometry, Scene, Side, TaskKind};
use crate::error::{Error, Result};
use crate::policy::TaskToken;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomizationConfig {
    /// Half-widths of the start position box, meters.
    pub start_position: [f64; 3],
    /// Half-widths of the start velocity box, m/s.
    pub start_velocity: [f64; 3],
    /// Half-width of the start yaw interval, rad.
    pub start_yaw: f64,
    /// Hover height above the object.
    pub h_range: [f64; 2],
    /// Radius of the ball around the nominal after-gate point.
    pub after_gate_radius: f64,
    /// Clearance of a recovery waypoint beyond its gate edge.
    pub b_geo: f64,
    /// Distance a recovery waypoint is moved back from the gate plane.
    pub recovery_standoff: f64,
    pub recovery_fraction: f64,
    /// Rollouts sharing one nominal draw (hover height, after-gate point,
    /// object offset).
    pub n_s: usize,
    /// Half-widths of the object position box.
    pub object_box: [f64; 3],
    /// Half-width of the release altitude jitter, meters.
    pub release_jitter: f64,
    /// Release point height above the bin rim.
    pub release_height: f64,
    /// Minimum clearance of plan segments from the frame, meters.
    pub safety_radius: f64,
    pub max_attempts: usize,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        RandomizationConfig {
            start_position: [0.3; 3],
            start_velocity: [0.2; 3],
            start_yaw: 0.2,
            h_range: [1.0, 1.5],
            after_gate_radius: 0.125,
            b_geo: 0.3,
            recovery_standoff: 0.8,
            recovery_fraction: 0.5,
            n_s: 10,
            object_box: [0.2, 0.2, 0.0],
            release_jitter: 0.1,
            release_height: 0.5,
            safety_radius: 0.1,
            max_attempts: 100,
        }
    }
}

impl RandomizationConfig {
    pub fn validate(&self) -> Result<()> {
        let boxes_ok = self
            .start_position
            .iter()
            .chain(&self.start_velocity)
            .chain(&self.object_box)
            .chain([&self.start_yaw, &self.release_jitter])
            .all(|&v| v >= 0.0);
        let ok = boxes_ok
            && self.h_range[0] <= self.h_range[1]
            && self.after_gate_radius >= 0.0
            && self.b_geo > 0.0
            && (0.0..=1.0).contains(&self.recovery_fraction)
            && self.n_s >= 1
            && self.safety_radius > 0.0
            && self.max_attempts >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad randomization config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Vector3<f64>,
    pub yaw: f64,
    /// Arrival radius.
    pub tolerance: f64,
    /// Gripper command applied from arrival on.
    pub gripper: f64,
    /// Time held at the waypoint after arrival, seconds.
    pub dwell: f64,
}

/// Draws shared by the rollouts of one nominal demonstration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NominalDraw {
    pub h: f64,
    pub after_gate_offset: Vector3<f64>,
    pub object_offset: Vector3<f64>,
}

/// Per-rollout perturbation draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub start_offset: Vector3<f64>,
    pub start_velocity: Vector3<f64>,
    pub start_yaw_offset: f64,
    pub recovery: Option<Side>,
    pub release_dz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointPlan {
    pub scene_id: String,
    pub task: TaskKind,
    pub task_token: TaskToken,
    pub start: Vector3<f64>,
    pub start_velocity: Vector3<f64>,
    pub start_yaw: f64,
    /// Waypoints after the start, in order.
    pub waypoints: Vec<Waypoint>,
    pub object: Vector3<f64>,
    /// Goal shown to the policy: the hover point, or the object.
    pub goal: Vector3<f64>,
    /// Goal shown once the gripper has closed, for manipulation tasks.
    pub place_goal: Option<Vector3<f64>>,
    pub nominal: NominalDraw,
    pub perturbation: Perturbation,
    pub attempts: usize,
}

impl WaypointPlan {
    /// Observation goal for a measured aperture.
    pub fn goal_for(&self, aperture: f64) -> Vector3<f64> {
        match self.place_goal {
            Some(g) if aperture <= 0.5 => g,
            _ => self.goal,
        }
    }

    /// Start followed by all waypoint positions.
    pub fn route(&self) -> Vec<Vector3<f64>> {
        std::iter::once(self.start)
            .chain(self.waypoints.iter().map(|w| w.position))
            .collect()
    }
}

fn uniform(rng: &mut rng::Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn in_box(rng: &mut rng::Rng, half: &[f64; 3]) -> Vector3<f64> {
    Vector3::new(
        uniform(rng, -half[0], half[0]),
        uniform(rng, -half[1], half[1]),
        uniform(rng, -half[2], half[2]),
    )
}

/// Hover goal `p_obj + (0, 0, h)` with `h ~ U(h_range)`.
pub fn randomize_goal(p_obj: &Vector3<f64>, h_range: [f64; 2], rng: &mut rng::Rng) -> Vector3<f64> {
    p_obj + Vector3::new(0.0, 0.0, uniform(rng, h_range[0], h_range[1]))
}

/// Uniform offset in the solid ball of radius `r`, by rejection from the
/// bounding cube.
pub fn ball_offset(r: f64, rng: &mut rng::Rng) -> Vector3<f64> {
    if r <= 0.0 {
        return Vector3::zeros();
    }
    loop {
        let d = in_box(rng, &[r; 3]);
        if d.norm() <= r {
            return d;
        }
    }
}

pub fn randomize_after_gate(nominal: &Vector3<f64>, r: f64, rng: &mut rng::Rng) -> Vector3<f64> {
    nominal + ball_offset(r, rng)
}

/// `edge midpoint + b_geo * outward edge normal`.
pub fn recovery_waypoint(gate: &GateGeometry, side: Side, b_geo: f64) -> Result<Vector3<f64>> {
    if !(b_geo > gate.thickness / 2.0) {
        return Err(Error::invalid("b_geo must exceed half the frame thickness"));
    }
    let (mid, n) = gate.edge(side);
    Ok(mid + n * b_geo)
}

pub fn draw_nominal(task: TaskKind, cfg: &RandomizationConfig, rng: &mut rng::Rng) -> NominalDraw {
    let h = uniform(rng, cfg.h_range[0], cfg.h_range[1]);
    let after_gate_offset = ball_offset(cfg.after_gate_radius, rng);
    let object_offset = if task.manipulates() {
        in_box(rng, &cfg.object_box)
    } else {
        Vector3::zeros()
    };
    NominalDraw {
        h,
        after_gate_offset,
        object_offset,
    }
}

fn draw_perturbation(task: TaskKind, cfg: &RandomizationConfig, rng: &mut rng::Rng) -> Perturbation {
    let start_offset = in_box(rng, &cfg.start_position);
    let start_velocity = in_box(rng, &cfg.start_velocity);
    let start_yaw_offset = uniform(rng, -cfg.start_yaw, cfg.start_yaw);
    let recovery = if task.traverses_gate() && rng.random::<f64>() < cfg.recovery_fraction {
        Some(Side::ALL[rng.random_range(0..4)])
    } else {
        None
    };
    let release_dz = if task.manipulates() {
        uniform(rng, -cfg.release_jitter, cfg.release_jitter)
    } else {
        0.0
    };
    Perturbation {
        start_offset,
        start_velocity,
        start_yaw_offset,
        recovery,
        release_dz,
    }
}

fn pass(position: Vector3<f64>, tolerance: f64, gripper: f64) -> Waypoint {
    Waypoint {
        position,
        yaw: 0.0,
        tolerance,
        gripper,
        dwell: 0.0,
    }
}

fn assemble(scene: &Scene, task: TaskKind, cfg: &RandomizationConfig, nominal: &NominalDraw, pert: &Perturbation) -> Result<WaypointPlan> {
    let object = scene.object + nominal.object_offset;
    let mut waypoints = Vec::new();
    if task.traverses_gate() {
        if let Some(side) = pert.recovery {
            let wp = recovery_waypoint(&scene.gate, side, cfg.b_geo)? - scene.gate.normal * cfg.recovery_standoff;
            waypoints.push(pass(wp, 0.15, -1.0));
        }
        waypoints.push(pass(scene.gate.center, 0.15, -1.0));
        waypoints.push(pass(scene.after_gate + nominal.after_gate_offset, 0.2, -1.0));
    }
    let (goal, place_goal) = match task {
        TaskKind::GateNav => {
            let goal = object + Vector3::new(0.0, 0.0, nominal.h);
            waypoints.push(Waypoint {
                dwell: 3.0,
                tolerance: 0.1,
                ..pass(goal, 0.1, -1.0)
            });
            (goal, None)
        }
        TaskKind::PickPlace | TaskKind::Compositional => {
            let bin_point = scene.bin.center + Vector3::new(0.0, 0.0, cfg.release_height);
            waypoints.push(pass(object + Vector3::new(0.0, 0.0, 0.3), 0.1, -1.0));
            waypoints.push(Waypoint {
                dwell: 0.8,
                ..pass(object, 0.03, 1.0)
            });
            waypoints.push(Waypoint {
                dwell: 3.0,
                ..pass(bin_point + Vector3::new(0.0, 0.0, pert.release_dz), 0.08, -1.0)
            });
            (object, Some(bin_point))
        }
    };
    Ok(WaypointPlan {
        scene_id: scene.id.clone(),
        task,
        task_token: task.token(),
        start: scene.start + pert.start_offset,
        start_velocity: pert.start_velocity,
        start_yaw: scene.start_yaw + pert.start_yaw_offset,
        waypoints,
        object,
        goal,
        place_goal,
        nominal: *nominal,
        perturbation: *pert,
        attempts: 0,
    })
}

/// Straight-segment check: every segment keeps `safety_radius` from the
/// frame and crosses the gate plane only inside the aperture; gate tasks
/// cross exactly once.
pub fn plan_is_clear(plan: &WaypointPlan, gate: &GateGeometry, safety_radius: f64) -> bool {
    let route = plan.route();
    let mut crossings = 0;
    for pair in route.windows(2) {
        if pair[0] == pair[1] || gate.segment_clearance(&pair[0], &pair[1]) < safety_radius {
            return false;
        }
        if let Some(c) = gate.crossing(&pair[0], &pair[1], safety_radius + gate.thickness / 2.0) {
            if !c.inside {
                return false;
            }
            crossings += 1;
        }
    }
    crossings == usize::from(plan.task.traverses_gate())
}

/// Plan for one rollout given the nominal draw; perturbations are redrawn
/// until the route is clear, at most `max_attempts` times.
pub fn build_plan_from(
    scene: &Scene,
    task: TaskKind,
    nominal: &NominalDraw,
    rng: &mut rng::Rng,
    cfg: &RandomizationConfig,
) -> Result<WaypointPlan> {
    for attempt in 1..=cfg.max_attempts {
        let pert = draw_perturbation(task, cfg, rng);
        let mut plan = assemble(scene, task, cfg, nominal, &pert)?;
        if plan_is_clear(&plan, &scene.gate, cfg.safety_radius) {
            plan.attempts = attempt;
            return Ok(plan);
        }
    }
    Err(Error::PlanRejected {
        attempts: cfg.max_attempts,
    })
}

/// [`build_plan_from`] with a fresh nominal draw from the same generator.
pub fn build_plan(scene: &Scene, task: TaskKind, rng: &mut rng::Rng, cfg: &RandomizationConfig) -> Result<WaypointPlan> {
    let nominal = draw_nominal(task, cfg, rng);
    build_plan_from(scene, task, &nominal, rng, cfg)
}
