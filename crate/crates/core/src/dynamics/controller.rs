use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{wrap_angle, ControlInput, DroneParams, DroneState};
use crate::error::{Error, Result};

/// Cascaded PD gains. The z gains are stiffer than the lateral ones; with
/// the default 0.3 m payload ratio the steady-state sag of this controller is
/// about 0.15 m, since it plans thrust with the nominal (payload-free) mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerGains {
    pub kp: Vector3<f64>,
    pub kd: Vector3<f64>,
    /// Tilt-error to body-rate gain, 1/s.
    pub attitude: f64,
    /// Yaw-error to yaw-rate gain, 1/s.
    pub yaw: f64,
    /// Largest commanded tilt, rad.
    pub max_tilt: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        ControllerGains {
            kp: Vector3::new(6.0, 6.0, 20.0),
            kd: Vector3::new(4.5, 4.5, 8.0),
            attitude: 10.0,
            yaw: 2.0,
            max_tilt: 0.6,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        let positive = self.kp.iter().chain(self.kd.iter()).all(|&g| g > 0.0)
            && self.attitude > 0.0
            && self.yaw > 0.0
            && self.max_tilt > 0.0;
        if positive {
            Ok(())
        } else {
            Err(Error::invalid("controller gains must be positive"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseTarget {
    pub position: Vector3<f64>,
    pub yaw: f64,
    /// Feedforward velocity, zero for a hold.
    #[serde(default)]
    pub velocity: Vector3<f64>,
}

impl PoseTarget {
    pub fn new(position: Vector3<f64>, yaw: f64) -> Self {
        PoseTarget {
            position,
            yaw,
            velocity: Vector3::zeros(),
        }
    }

    pub fn with_velocity(mut self, velocity: Vector3<f64>) -> Self {
        self.velocity = velocity;
        self
    }
}

/// Normalized thrust that balances the weight of `params.total_mass()`.
pub fn hover_thrust(params: &DroneParams) -> f64 {
    params.total_mass() * params.gravity.norm() / params.thrust_coeff
}

/// Position/yaw setpoint tracking.
///
/// Desired acceleration `a = Kp (p_des - p) + Kd (v_des - v) - g` gives the thrust
/// magnitude `m |a| / k_th` and the desired body z-axis `a / |a|`; body rates
/// rotate the current z-axis toward it and turn the heading toward `yaw_des`.
/// `params` is the controller's model of the vehicle: pass a payload-free
/// copy to obtain a controller that is blind to grasped mass.
pub fn position_setpoint_controller(
    target: &PoseTarget,
    state: &DroneState,
    params: &DroneParams,
    gains: &ControllerGains,
) -> ControlInput {
    let mut accel = gains.kp.component_mul(&(target.position - state.position))
        + gains.kd.component_mul(&(target.velocity - state.velocity))
        - params.gravity;

    let g = params.gravity.norm();
    if accel.z < 0.2 * g {
        accel.z = 0.2 * g;
    }
    let lateral = accel.xy().norm();
    let lateral_max = accel.z * gains.max_tilt.tan();
    if lateral > lateral_max {
        let s = lateral_max / lateral;
        accel.x *= s;
        accel.y *= s;
    }

    let norm = accel.norm();
    if !(norm >= 1e-9) {
        return ControlInput::new(hover_thrust(params), Vector3::zeros());
    }
    let thrust = (params.total_mass() * norm / params.thrust_coeff).clamp(0.0, 1.0);
    let desired_axis = accel / norm;

    let rotation = state.rotation();
    let axis = rotation * Vector3::z();
    let tilt_error_body = rotation.inverse() * axis.cross(&desired_axis);
    let yaw_error = wrap_angle(target.yaw - state.yaw());

    let rates = Vector3::new(
        gains.attitude * tilt_error_body.x,
        gains.attitude * tilt_error_body.y,
        gains.yaw * yaw_error,
    );
    ControlInput::new(thrust, rates).saturated(params.max_body_rate)
}
