use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{ActionChunk, DX, DY, DYAW, DZ, GRIPPER, MAX_STEP_DELTA};

/// Absolute pose target handed to the position controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setpoint {
    pub position: Vector3<f64>,
    pub yaw: f64,
    /// Gripper command in `[-1, 1]`, `+1` closes.
    pub gripper: f64,
    /// Translation rate of the row over the execution period.
    #[serde(default)]
    pub velocity: Vector3<f64>,
}

/// Cumulative sums of the chunk deltas offset from `(position, yaw)`.
/// Row `t` of the result is the pose after applying rows `0..=t`, with the
/// row's translation divided by `dt` as feedforward velocity.
pub fn actions_to_setpoints(chunk: &ActionChunk, position: Vector3<f64>, yaw: f64, dt: f64) -> Vec<Setpoint> {
    let mut p = position;
    let mut psi = yaw;
    (0..chunk.rows())
        .map(|t| {
            let r = chunk.row(t);
            let step = Vector3::new(r[DX], r[DY], r[DZ]);
            p += step;
            psi += r[DYAW];
            Setpoint {
                position: p,
                yaw: psi,
                gripper: r[GRIPPER],
                velocity: step / dt,
            }
        })
        .collect()
}

/// Execution-time feasibility clamp: translation delta norm and yaw delta
/// limited to [`MAX_STEP_DELTA`], gripper to `[-1, 1]`.
pub fn clamp_row(row: &mut [f64]) {
    let n = (row[DX] * row[DX] + row[DY] * row[DY] + row[DZ] * row[DZ]).sqrt();
    if n > MAX_STEP_DELTA {
        let k = MAX_STEP_DELTA / n;
        row[DX] *= k;
        row[DY] *= k;
        row[DZ] *= k;
    }
    row[DYAW] = row[DYAW].clamp(-MAX_STEP_DELTA, MAX_STEP_DELTA);
    row[GRIPPER] = row[GRIPPER].clamp(-1.0, 1.0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::ACTION_DIM;

    #[test]
    fn zero_chunk_holds_pose() {
        let p = Vector3::new(1.0, -2.0, 0.5);
        let sp = actions_to_setpoints(&ActionChunk::zeros(25, ACTION_DIM), p, 0.3, 0.1);
        assert_eq!(sp.len(), 25);
        assert!(sp.iter().all(|s| s.position == p && s.yaw == 0.3));
    }

    #[test]
    fn climb_sums() {
        let mut c = ActionChunk::zeros(25, ACTION_DIM);
        for t in 0..25 {
            c[(t, DZ)] = 0.01;
            c[(t, GRIPPER)] = 1.0;
        }
        let sp = actions_to_setpoints(&c, Vector3::new(0.0, 0.0, 1.0), 0.0, 0.1);
        assert!((sp[24].position.z - 1.25).abs() < 1e-12);
        assert!(sp.iter().all(|s| s.gripper == 1.0));
    }

    #[test]
    fn clamp_limits_norm() {
        let mut r = [0.6, 0.8, 0.0, -2.0, 3.0];
        clamp_row(&mut r);
        assert!((r[0] - 0.3).abs() < 1e-12 && (r[1] - 0.4).abs() < 1e-12);
        assert_eq!(r[DYAW], -0.5);
        assert_eq!(r[GRIPPER], 1.0);
        let mut small = [0.1, 0.0, 0.0, 0.1, -0.5];
        let before = small;
        clamp_row(&mut small);
        assert_eq!(small, before);
    }
}
