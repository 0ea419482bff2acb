use nalgebra::Vector3;

use crate::policy::{ActionChunk, Observation, TaskToken, VelocityField, ACTION_DIM, DX, DZ, GRIPPER};
use crate::synth::GateGeometry;

/// Scripted carrot follower wrapped as a velocity field.
///
/// Its clean chunk depends only on the observation: through the gate if the
/// vehicle is still in front of it, then to the hover goal, or down onto the
/// object and over to the bin. `eval` transports any `x` onto that chunk
/// in the Euler sampler, and the vector-Jacobian product is zero.
#[derive(Debug, Clone)]
pub struct OracleField {
    pub gate: GateGeometry,
    pub horizon: usize,
    /// Carrot advance per row, meters.
    pub step: f64,
    /// Carrot advance per row on the final descent to the object.
    pub descent_step: f64,
    /// Rows the carrot rests on the object or bin point before the gripper
    /// command changes.
    pub settle_rows: usize,
    pub pregrasp_height: f64,
}

impl OracleField {
    pub fn new(gate: GateGeometry, horizon: usize) -> Self {
        OracleField {
            gate,
            horizon,
            step: 0.1,
            descent_step: 0.03,
            settle_rows: 8,
            pregrasp_height: 0.3,
        }
    }

    fn gate_route(&self, p: &Vector3<f64>, route: &mut Vec<(Vector3<f64>, f64)>) {
        let g = &self.gate;
        if g.signed_distance(p) < 0.0 {
            let before = g.center - g.normal * 0.7;
            let off_axis = (p - g.center) - g.normal * g.signed_distance(p);
            if off_axis.norm() > 0.1 {
                route.push((before, self.step));
            }
            route.push((g.center + g.normal * 0.7, self.step));
        }
    }

    /// Clean chunk for an observation.
    pub fn chunk(&self, obs: &Observation) -> ActionChunk {
        let p = obs.position;
        let mut route = Vec::new();
        let mut gripper_after = -1.0;
        let mut gripper_before = -1.0;
        if obs.task_token == TaskToken::GATE_NAV {
            self.gate_route(&p, &mut route);
            route.push((obs.goal, self.step));
        } else {
            if obs.task_token == TaskToken::COMPOSITIONAL && obs.aperture > 0.5 {
                self.gate_route(&p, &mut route);
            }
            if obs.aperture > 0.5 {
                let above = obs.goal + Vector3::new(0.0, 0.0, self.pregrasp_height);
                let lateral = (p - obs.goal).xy().norm();
                if lateral > 0.03 || p.z > above.z + 0.05 || !route.is_empty() {
                    route.push((above, self.step));
                }
                route.push((obs.goal, self.descent_step));
                gripper_after = 1.0;
            } else {
                route.push((obs.goal, self.step));
                gripper_before = 1.0;
            }
        }

        let mut carrot = p;
        let mut leg = 0;
        let mut rested = 0;
        let mut chunk = ActionChunk::zeros(self.horizon, ACTION_DIM);
        for t in 0..self.horizon {
            let mut left = route.get(leg).map_or(0.0, |r| r.1);
            let start = carrot;
            while left > 0.0 && leg < route.len() {
                let to = route[leg].0 - carrot;
                let d = to.norm();
                if d <= left {
                    carrot = route[leg].0;
                    left -= d;
                    leg += 1;
                    if let Some(next) = route.get(leg) {
                        left = left.min(next.1);
                    }
                } else {
                    carrot += to * (left / d);
                    left = 0.0;
                }
            }
            if leg == route.len() {
                rested += 1;
            }
            let delta = carrot - start;
            for d in DX..=DZ {
                chunk[(t, d)] = delta[d];
            }
            chunk[(t, GRIPPER)] = if rested > self.settle_rows { gripper_after } else { gripper_before };
        }
        chunk
    }
}

impl VelocityField for OracleField {
    fn shape(&self) -> (usize, usize) {
        (self.horizon, ACTION_DIM)
    }

    fn eval(&self, x: &ActionChunk, obs: &Observation, tau: f64) -> ActionChunk {
        let mut v = self.chunk(obs);
        v.axpy(-1.0, x);
        v.scaled(1.0 / (1.0 - tau).max(1e-9))
    }

    fn vjp(&self, x: &ActionChunk, _obs: &Observation, _tau: f64, _cotangent: &ActionChunk) -> ActionChunk {
        ActionChunk::zeros(x.rows(), x.cols())
    }
}
