use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::Scene;
use crate::dynamics::{ControlInput, ControllerGains, DroneParams, DroneState, MassModel, PoseTarget, Vehicle};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Integration step, seconds.
    pub sim_dt: f64,
    /// A closing gripper grasps the object within this distance.
    pub grasp_radius: f64,
    /// Payload mass as a fraction of the airframe mass.
    pub payload_ratio: f64,
    /// Frame distance below which the vehicle counts as crashed.
    pub crash_radius: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            sim_dt: 0.01,
            grasp_radius: 0.1,
            payload_ratio: 0.3,
            crash_radius: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorldEvent {
    Grasp { t: f64, position: Vector3<f64> },
    Release { t: f64, position: Vector3<f64> },
    /// A close command issued away from the object.
    CloseAway { t: f64 },
    Crash { t: f64 },
}

/// Vehicle, gripper and a graspable object in a scene.
///
/// Each step applies the grasp rule before integrating: a close command
/// (`u > 0`) grasps the object when the vehicle is within `grasp_radius` of
/// it and the gripper is still at least half open; an open command releases
/// a held object where the vehicle is. Touching the gate frame or dropping
/// below the ground is a crash.
#[derive(Debug, Clone)]
pub struct World {
    pub scene: Scene,
    pub vehicle: Vehicle,
    pub object: Vector3<f64>,
    pub object_taken: bool,
    pub cfg: WorldConfig,
    pub min_frame_distance: f64,
    last_command: f64,
}

impl World {
    pub fn new(
        scene: Scene,
        object: Vector3<f64>,
        initial: DroneState,
        params: DroneParams,
        gains: ControllerGains,
        mass_model: MassModel,
        cfg: WorldConfig,
    ) -> Self {
        let vehicle = Vehicle::new(initial, params, gains, mass_model);
        let min_frame_distance = scene.gate.frame_distance(&initial.position);
        World {
            scene,
            vehicle,
            object,
            object_taken: false,
            cfg,
            min_frame_distance,
            last_command: -1.0,
        }
    }

    pub fn t(&self) -> f64 {
        self.vehicle.t
    }

    pub fn state(&self) -> &DroneState {
        &self.vehicle.state
    }

    pub fn holding(&self) -> bool {
        self.vehicle.holding()
    }

    /// One integration step. Returns the applied control and any event.
    pub fn step(&mut self, target: &PoseTarget, gripper: f64, events: &mut Vec<WorldEvent>) -> Result<ControlInput> {
        let t = self.t();
        let p = self.vehicle.state.position;
        if gripper > 0.0 {
            let near = (p - self.object).norm() <= self.cfg.grasp_radius;
            if !self.holding() && !self.object_taken && near && self.vehicle.gripper.aperture >= 0.5 {
                let m = self.vehicle.params.mass * self.cfg.payload_ratio;
                self.vehicle.attach(m);
                self.object_taken = true;
                events.push(WorldEvent::Grasp { t, position: p });
            } else if self.last_command <= 0.0 && !self.holding() && !near {
                events.push(WorldEvent::CloseAway { t });
            }
        } else if self.holding() {
            self.vehicle.release();
            self.object = p;
            events.push(WorldEvent::Release { t, position: p });
        }
        self.last_command = gripper;
        let u = self.vehicle.step(target, gripper, self.cfg.sim_dt)?;
        let p = self.vehicle.state.position;
        if self.holding() {
            self.object = p;
        }
        let d = self.scene.gate.frame_distance(&p);
        self.min_frame_distance = self.min_frame_distance.min(d);
        if d < self.cfg.crash_radius || p.z < 0.0 || !self.vehicle.state.is_finite() {
            events.push(WorldEvent::Crash { t: self.t() });
        }
        Ok(u)
    }
}
