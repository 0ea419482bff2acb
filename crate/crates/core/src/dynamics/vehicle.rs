use serde::{Deserialize, Serialize};

use super::{position_setpoint_controller, step_rk4, ControlInput, ControllerGains, DroneParams, DroneState, Gripper, PoseTarget};
use crate::error::{Error, Result};

/// Which mass the setpoint controller assumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassModel {
    /// The airframe mass only; a grasped payload is an unmodeled disturbance.
    #[default]
    Nominal,
    /// Airframe plus any attached payload.
    Total,
}

/// Drone, gripper and optional payload advanced together under the setpoint
/// controller.
#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub state: DroneState,
    pub gripper: Gripper,
    /// Airframe parameters; `payload_mass` holds the attached payload.
    pub params: DroneParams,
    pub gains: ControllerGains,
    pub mass_model: MassModel,
    pub t: f64,
}

impl Vehicle {
    pub fn new(state: DroneState, params: DroneParams, gains: ControllerGains, mass_model: MassModel) -> Self {
        Vehicle {
            state,
            gripper: Gripper::default(),
            params: params.with_payload(0.0),
            gains,
            mass_model,
            t: 0.0,
        }
    }

    pub fn holding(&self) -> bool {
        self.params.payload_mass > 0.0
    }

    pub fn attach(&mut self, mass: f64) {
        self.params.payload_mass = mass;
    }

    pub fn release(&mut self) {
        self.params.payload_mass = 0.0;
    }

    /// One integration step toward `target` with gripper command `gripper`.
    pub fn step(&mut self, target: &PoseTarget, gripper: f64, dt: f64) -> Result<ControlInput> {
        let model = match self.mass_model {
            MassModel::Nominal => self.params.with_payload(0.0),
            MassModel::Total => self.params,
        };
        let u = position_setpoint_controller(target, &self.state, &model, &self.gains);
        if !u.is_finite() {
            return Err(Error::RolloutAborted { t: self.t, tag: "crash" });
        }
        self.state = step_rk4(&self.state, &u, dt, &self.params)
            .map_err(|_| Error::RolloutAborted { t: self.t, tag: "crash" })?;
        self.gripper.command = gripper;
        let holding = self.holding();
        self.gripper.step(dt, holding);
        self.t += dt;
        Ok(u)
    }
}
