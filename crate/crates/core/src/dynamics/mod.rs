//! Semi-kinematic quadrotor model.
//!
//! State is position and velocity in a z-up world frame plus a scalar-first
//! body-to-world quaternion. Inputs are normalized collective thrust and body
//! rates; there is no rotational inertia, drag or rotor model. A grasped
//! payload is a rigid point mass at the vehicle origin.

mod controller;
mod gripper;
mod simulate;
mod vehicle;

pub use controller::{hover_thrust, position_setpoint_controller, ControllerGains, PoseTarget};
pub use gripper::Gripper;
pub use simulate::{
    read_trajectory_jsonl, simulate, write_trajectory_jsonl, MassEvent, Trajectory,
    TrajectoryRecord, TrajectorySample,
};
pub use vehicle::{MassModel, Vehicle};

use nalgebra::{Quaternion, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted integration step, seconds.
pub const MAX_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroneState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Body-to-world rotation, `(w, x, y, z)`.
    pub attitude: Quaternion<f64>,
}

impl DroneState {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self::with_yaw(position, 0.0)
    }

    pub fn with_yaw(position: Vector3<f64>, yaw: f64) -> Self {
        let half = 0.5 * yaw;
        DroneState {
            position,
            velocity: Vector3::zeros(),
            attitude: Quaternion::new(half.cos(), 0.0, 0.0, half.sin()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.attitude.coords.iter().all(|v| v.is_finite())
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        UnitQuaternion::from_quaternion(self.attitude).to_rotation_matrix()
    }

    /// Heading of the body x-axis about world z.
    pub fn yaw(&self) -> f64 {
        let q = &self.attitude;
        let (w, x, y, z) = (q.w, q.i, q.j, q.k);
        (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z))
    }

    /// Body z-axis expressed in the world frame.
    pub fn thrust_axis(&self) -> Vector3<f64> {
        self.rotation() * Vector3::z()
    }

    fn advanced(&self, d: &StateDerivative, h: f64) -> DroneState {
        DroneState {
            position: self.position + d.position * h,
            velocity: self.velocity + d.velocity * h,
            attitude: self.attitude + d.attitude * h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// Normalized collective thrust in `[0, 1]`.
    pub thrust: f64,
    /// Body angular rates, rad/s.
    pub body_rates: Vector3<f64>,
}

impl ControlInput {
    pub fn new(thrust: f64, body_rates: Vector3<f64>) -> Self {
        ControlInput { thrust, body_rates }
    }

    /// Clip thrust to `[0, 1]` and scale rates down to `max_rate`.
    pub fn saturated(self, max_rate: f64) -> Self {
        let thrust = self.thrust.clamp(0.0, 1.0);
        let norm = self.body_rates.norm();
        let body_rates = if norm > max_rate && norm > 0.0 {
            self.body_rates * (max_rate / norm)
        } else {
            self.body_rates
        };
        ControlInput { thrust, body_rates }
    }

    pub fn is_finite(&self) -> bool {
        self.thrust.is_finite() && self.body_rates.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DroneParams {
    /// Vehicle mass without payload, kg.
    pub mass: f64,
    /// Thrust at `f_th = 1`, newtons.
    pub thrust_coeff: f64,
    pub gravity: Vector3<f64>,
    /// Currently attached payload, kg.
    pub payload_mass: f64,
    /// Body-rate limit, rad/s.
    pub max_body_rate: f64,
}

impl Default for DroneParams {
    fn default() -> Self {
        DroneParams {
            mass: 0.6,
            thrust_coeff: 11.77,
            gravity: Vector3::new(0.0, 0.0, -9.81),
            payload_mass: 0.0,
            max_body_rate: 6.0,
        }
    }
}

impl DroneParams {
    pub fn total_mass(&self) -> f64 {
        self.mass + self.payload_mass
    }

    pub fn with_payload(mut self, payload_mass: f64) -> Self {
        self.payload_mass = payload_mass;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.thrust_coeff > 0.0 && self.payload_mass >= 0.0) {
            return Err(Error::invalid("mass and thrust coefficient must be positive"));
        }
        if self.thrust_coeff < self.mass * self.gravity.norm() {
            return Err(Error::invalid("maximum thrust does not exceed vehicle weight"));
        }
        if !(self.max_body_rate > 0.0) {
            return Err(Error::invalid("body-rate limit must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub attitude: Quaternion<f64>,
}

/// Continuous dynamics: `p' = v`, `v' = g + (k/m) f R(q) e3`,
/// `q' = 1/2 q (0, omega)`.
pub fn derivative(
    state: &DroneState,
    input: &ControlInput,
    params: &DroneParams,
) -> Result<StateDerivative> {
    if !state.is_finite() {
        return Err(Error::NonFinite { what: "drone state" });
    }
    if !input.is_finite() {
        return Err(Error::NonFinite { what: "control input" });
    }
    let accel_thrust = params.thrust_coeff / params.total_mass() * input.thrust;
    let velocity_dot = params.gravity + state.thrust_axis() * accel_thrust;
    let omega = Quaternion::from_parts(0.0, input.body_rates);
    let attitude_dot = (state.attitude * omega) * 0.5;
    Ok(StateDerivative {
        position: state.velocity,
        velocity: velocity_dot,
        attitude: attitude_dot,
    })
}

/// One classical Runge-Kutta step with the input held constant, followed by
/// quaternion renormalization.
pub fn step_rk4(
    state: &DroneState,
    input: &ControlInput,
    dt: f64,
    params: &DroneParams,
) -> Result<DroneState> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(Error::StepOutOfRange { dt, max: MAX_STEP });
    }
    let k1 = derivative(state, input, params)?;
    let k2 = derivative(&state.advanced(&k1, 0.5 * dt), input, params)?;
    let k3 = derivative(&state.advanced(&k2, 0.5 * dt), input, params)?;
    let k4 = derivative(&state.advanced(&k3, dt), input, params)?;
    let w = dt / 6.0;
    let mut next = DroneState {
        position: state.position
            + (k1.position + k2.position * 2.0 + k3.position * 2.0 + k4.position) * w,
        velocity: state.velocity
            + (k1.velocity + k2.velocity * 2.0 + k3.velocity * 2.0 + k4.velocity) * w,
        attitude: state.attitude
            + (k1.attitude + k2.attitude * 2.0 + k3.attitude * 2.0 + k4.attitude) * w,
    };
    let norm = next.attitude.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::NonFinite { what: "attitude" });
    }
    next.attitude /= norm;
    Ok(next)
}

pub(crate) fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    }
    r
}
