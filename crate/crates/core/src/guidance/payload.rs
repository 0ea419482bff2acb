use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{ActionChunk, Observation, DZ};

/// Altitude bias applied while a payload is believed to be held.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PayloadSpec {
    pub lambda_z: f64,
    /// Target climb above the current altitude, meters.
    pub delta_z: f64,
    /// Exponent of the temporal ramp `(t / (H - 1))^gamma`.
    pub gamma: f64,
    /// Gripper command history window.
    pub k: usize,
    /// Aperture at or below which the gripper reads fully closed.
    pub g_closed: f64,
    /// Aperture at or above which the gripper reads fully open.
    pub g_open: f64,
}

impl Default for PayloadSpec {
    fn default() -> Self {
        PayloadSpec {
            lambda_z: 0.5,
            delta_z: 0.15,
            gamma: 1.0,
            k: 4,
            g_closed: 0.2,
            g_open: 0.8,
        }
    }
}

impl PayloadSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda_z >= 0.0
            && self.delta_z.is_finite()
            && self.gamma >= 0.0
            && self.k >= 1
            && (0.0..=1.0).contains(&self.g_closed)
            && (0.0..=1.0).contains(&self.g_open)
            && self.g_closed < self.g_open;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad payload spec {self:?}")))
        }
    }
}

/// Intermediate scores behind the payload confidence `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Confidence {
    pub c_intent: f64,
    pub o_intent: f64,
    pub c_meas: f64,
    pub o_meas: f64,
    pub o_flag: f64,
    pub alpha: f64,
    /// The aperture was outside `[0, 1]` and was clipped.
    pub aperture_clipped: bool,
}

/// Payload confidence from the last `K` gripper commands (fewer if the
/// history is shorter; none gives zero intent) and the measured aperture.
pub fn payload_confidence(commands: &[f64], aperture: f64, spec: &PayloadSpec) -> Confidence {
    let recent = &commands[commands.len().saturating_sub(spec.k)..];
    let n = recent.len().max(1) as f64;
    let closeness = |u: f64| ((u + 1.0) / 2.0).clamp(0.0, 1.0);
    let c_intent = recent.iter().map(|&u| closeness(u)).sum::<f64>() / n;
    let o_intent = recent.iter().map(|&u| (1.0 - (u + 1.0) / 2.0).clamp(0.0, 1.0)).sum::<f64>() / n;
    let g = aperture.clamp(0.0, 1.0);
    let aperture_clipped = g != aperture;
    if aperture_clipped {
        log::warn!("aperture {aperture} clipped to [0, 1]");
    }
    let c_meas = ((spec.g_open - g) / (spec.g_open - spec.g_closed)).clamp(0.0, 1.0);
    let o_meas = 1.0 - c_meas;
    let o_flag = (0.5 * o_intent + 0.5 * o_meas).clamp(0.0, 1.0);
    let alpha = ((1.0 - o_flag) * c_intent * c_meas).clamp(0.0, 1.0);
    Confidence {
        c_intent,
        o_intent,
        c_meas,
        o_meas,
        o_flag,
        alpha,
        aperture_clipped,
    }
}

/// Temporal ramp `(t / (H - 1))^gamma`; a single row gets weight one.
pub fn payload_weights(h: usize, gamma: f64) -> Vec<f64> {
    if h == 1 {
        return vec![1.0];
    }
    (0..h).map(|t| (t as f64 / (h - 1) as f64).powf(gamma)).collect()
}

/// Value and gradient of
/// `(lambda_z / 2) alpha sum_t w_t (z_t - z_des)^2` with
/// `z_t = z_curr + sum_{i<=t} dz_i` and `z_des = z_curr + delta_z`.
///
/// Only the `dz` column of the gradient is non-zero:
/// `dPhi/d dz_i = lambda_z alpha sum_{t>=i} w_t (z_t - z_des)`.
pub fn payload_potential_with_alpha(a: &ActionChunk, z_curr: f64, alpha: f64, spec: &PayloadSpec) -> (f64, ActionChunk) {
    let h = a.rows();
    let mut grad = ActionChunk::zeros(h, a.cols());
    if alpha == 0.0 || spec.lambda_z == 0.0 {
        return (0.0, grad);
    }
    let w = payload_weights(h, spec.gamma);
    let z_des = z_curr + spec.delta_z;
    let k = spec.lambda_z * alpha;
    let mut z = z_curr;
    let mut residuals = Vec::with_capacity(h);
    let mut value = 0.0;
    for t in 0..h {
        z += a[(t, DZ)];
        let r = w[t] * (z - z_des);
        value += r * (z - z_des);
        residuals.push(r);
    }
    let mut tail = 0.0;
    for i in (0..h).rev() {
        tail += residuals[i];
        grad[(i, DZ)] = k * tail;
    }
    (0.5 * k * value, grad)
}

/// [`payload_potential_with_alpha`] with `alpha` from the gripper history and
/// the observed aperture, and `z_curr` the observed altitude.
pub fn payload_potential(a: &ActionChunk, obs: &Observation, gripper_history: &[f64], spec: &PayloadSpec) -> (f64, ActionChunk) {
    let alpha = payload_confidence(gripper_history, obs.aperture, spec).alpha;
    payload_potential_with_alpha(a, obs.position.z, alpha, spec)
}
