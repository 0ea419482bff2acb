use std::io::{BufRead, Write};

use nalgebra::{Quaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{step_rk4, ControlInput, DroneParams, DroneState};
use crate::error::{Error, Result};

/// Payload attach/detach at a point in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MassEvent {
    Grasp { time: f64, mass: f64 },
    Release { time: f64 },
}

impl MassEvent {
    pub fn time(&self) -> f64 {
        match *self {
            MassEvent::Grasp { time, .. } | MassEvent::Release { time } => time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: DroneState,
    /// Input applied from `t` to the next sample.
    pub control: ControlInput,
    /// Total mass, vehicle plus payload.
    pub mass: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&TrajectorySample> {
        self.samples.last()
    }
}

/// Fixed-step rollout of `controller` under [`step_rk4`].
///
/// Returns `floor(duration / dt) + 1` samples starting at `t = 0`. Mass events
/// take effect at the first sample whose time is not before the event.
pub fn simulate<C>(
    initial: &DroneState,
    mut controller: C,
    duration: f64,
    dt: f64,
    params: &DroneParams,
    events: &[MassEvent],
) -> Result<Trajectory>
where
    C: FnMut(f64, &DroneState) -> ControlInput,
{
    if !(duration > 0.0) {
        return Err(Error::invalid("duration must be positive"));
    }
    if events.windows(2).any(|w| w[1].time() < w[0].time()) {
        return Err(Error::invalid("mass events must be sorted by time"));
    }
    let steps = (duration / dt + 1e-9).floor() as usize;
    let mut params = *params;
    let mut state = *initial;
    let mut pending = events.iter().peekable();
    let mut samples = Vec::with_capacity(steps + 1);

    for k in 0..=steps {
        let t = k as f64 * dt;
        while let Some(event) = pending.next_if(|e| e.time() <= t + 1e-12) {
            params.payload_mass = match *event {
                MassEvent::Grasp { mass, .. } => mass,
                MassEvent::Release { .. } => 0.0,
            };
        }
        let control = controller(t, &state);
        if !control.is_finite() {
            return Err(Error::RolloutAborted { t, tag: "crash" });
        }
        let control = control.saturated(params.max_body_rate);
        samples.push(TrajectorySample {
            t,
            state,
            control,
            mass: params.total_mass(),
        });
        if k < steps {
            state = step_rk4(&state, &control, dt, &params)?;
        }
    }
    Ok(Trajectory { samples })
}

/// One line of a trajectory export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub p: [f64; 3],
    pub v: [f64; 3],
    /// Scalar-first quaternion.
    pub q: [f64; 4],
    pub f_th: f64,
    pub omega: [f64; 3],
    pub mass: f64,
}

impl From<&TrajectorySample> for TrajectoryRecord {
    fn from(s: &TrajectorySample) -> Self {
        let q = &s.state.attitude;
        TrajectoryRecord {
            t: s.t,
            p: s.state.position.into(),
            v: s.state.velocity.into(),
            q: [q.w, q.i, q.j, q.k],
            f_th: s.control.thrust,
            omega: s.control.body_rates.into(),
            mass: s.mass,
        }
    }
}

impl From<&TrajectoryRecord> for TrajectorySample {
    fn from(r: &TrajectoryRecord) -> Self {
        TrajectorySample {
            t: r.t,
            state: DroneState {
                position: Vector3::from(r.p),
                velocity: Vector3::from(r.v),
                attitude: Quaternion::new(r.q[0], r.q[1], r.q[2], r.q[3]),
            },
            control: ControlInput::new(r.f_th, Vector3::from(r.omega)),
            mass: r.mass,
        }
    }
}

/// Writes one JSON object per sample:
/// `{"t","p":[3],"v":[3],"q":[w,x,y,z],"f_th","omega":[3],"mass"}`.
pub fn write_trajectory_jsonl<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    for sample in &traj.samples {
        serde_json::to_writer(&mut out, &TrajectoryRecord::from(sample))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trajectory_jsonl<R: BufRead>(input: R) -> Result<Trajectory> {
    let mut samples = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TrajectoryRecord = serde_json::from_str(&line)?;
        samples.push(TrajectorySample::from(&record));
    }
    Ok(Trajectory { samples })
}
