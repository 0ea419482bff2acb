use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{Crossing, Scene, WaypointPlan, World, WorldConfig, WorldEvent};
use crate::dynamics::{
    ControlInput, ControllerGains, DroneParams, DroneState, MassModel, PoseTarget, Trajectory, TrajectorySample,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpertConfig {
    /// Speed of the carrot the controller chases, m/s.
    pub cruise_speed: f64,
    pub timeout: f64,
    /// Minimum allowed distance to the frame along a kept rollout.
    pub safety_radius: f64,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        ExpertConfig {
            cruise_speed: 1.0,
            timeout: 60.0,
            safety_radius: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutSample {
    pub t: f64,
    pub state: DroneState,
    pub control: ControlInput,
    pub gripper_command: f64,
    pub aperture: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertRollout {
    /// One sample per integration step, the last one without a control
    /// applied after it.
    pub samples: Vec<RolloutSample>,
    pub events: Vec<WorldEvent>,
    pub min_frame_distance: f64,
}

impl ExpertRollout {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn trajectory(&self) -> Trajectory {
        Trajectory {
            samples: self
                .samples
                .iter()
                .map(|s| TrajectorySample {
                    t: s.t,
                    state: s.state,
                    control: s.control,
                    mass: s.mass,
                })
                .collect(),
        }
    }

    /// Crossings of the gate plane between consecutive samples.
    pub fn gate_crossings(&self, scene: &Scene) -> Vec<Crossing> {
        self.samples
            .windows(2)
            .filter_map(|w| scene.gate.crossing(&w[0].state.position, &w[1].state.position, 0.0))
            .collect()
    }

    pub fn max_thrust(&self) -> f64 {
        self.samples.iter().map(|s| s.control.thrust).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_thrust(&self) -> f64 {
        self.samples.iter().map(|s| s.control.thrust).fold(f64::INFINITY, f64::min)
    }

    pub fn max_body_rate(&self) -> f64 {
        self.samples.iter().map(|s| s.control.body_rates.norm()).fold(0.0, f64::max)
    }
}

/// Flies `plan` with the setpoint controller chasing a carrot that moves
/// along the route at cruise speed.
///
/// The carrot stops at each waypoint until the vehicle is within the
/// waypoint tolerance; the waypoint's gripper command then takes effect and
/// the vehicle holds for the dwell time before the carrot moves on. The
/// controller knows the payload mass, so demonstrations do not sag.
///
/// Timeouts and frame clearance below the safety radius abort with tags
/// `timeout` and `collision`.
pub fn track_plan(
    plan: &WaypointPlan,
    scene: &Scene,
    params: &DroneParams,
    gains: &ControllerGains,
    world_cfg: &WorldConfig,
    cfg: &ExpertConfig,
) -> Result<ExpertRollout> {
    let mut initial = DroneState::with_yaw(plan.start, plan.start_yaw);
    initial.velocity = plan.start_velocity;
    let mut world = World::new(scene.clone(), plan.object, initial, *params, *gains, MassModel::Total, *world_cfg);
    let dt = world_cfg.sim_dt;
    let mut carrot = plan.start;
    let mut gripper = -1.0;
    let mut index = 0;
    let mut arrived_at: Option<f64> = None;
    let mut samples = Vec::new();
    let mut events = Vec::new();
    let max_steps = (cfg.timeout / dt).ceil() as usize;

    for _ in 0..=max_steps {
        let t = world.t();
        let Some(wp) = plan.waypoints.get(index) else {
            break;
        };
        let to_wp = wp.position - carrot;
        let step = cfg.cruise_speed * dt;
        carrot = if to_wp.norm() <= step { wp.position } else { carrot + to_wp.normalize() * step };
        if arrived_at.is_none() && carrot == wp.position && (world.state().position - wp.position).norm() <= wp.tolerance {
            arrived_at = Some(t);
            gripper = wp.gripper;
        }
        let target = PoseTarget::new(carrot, wp.yaw);
        let before = world.vehicle.gripper.aperture;
        let mass = world.vehicle.params.total_mass();
        let state = *world.state();
        let control = world.step(&target, gripper, &mut events)?;
        samples.push(RolloutSample {
            t,
            state,
            control,
            gripper_command: gripper,
            aperture: before,
            mass,
        });
        if events.iter().any(|e| matches!(e, WorldEvent::Crash { .. })) || world.min_frame_distance < cfg.safety_radius {
            return Err(Error::RolloutAborted { t, tag: "collision" });
        }
        if let Some(t0) = arrived_at {
            if world.t() - t0 >= wp.dwell - 1e-9 {
                index += 1;
                arrived_at = None;
            }
        }
    }
    if index < plan.waypoints.len() {
        return Err(Error::RolloutAborted {
            t: world.t(),
            tag: "timeout",
        });
    }
    samples.push(RolloutSample {
        t: world.t(),
        state: *world.state(),
        control: samples.last().map_or(ControlInput::new(0.0, Vector3::zeros()), |s| s.control),
        gripper_command: gripper,
        aperture: world.vehicle.gripper.aperture,
        mass: world.vehicle.params.total_mass(),
    });
    Ok(ExpertRollout {
        samples,
        events,
        min_frame_distance: world.min_frame_distance,
    })
}
