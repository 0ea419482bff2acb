//! Trial log: one JSON object per line.
//!
//! ```text
//! {"tick":0,"t":0.0,"observation":{...},"setpoint":{...},"events":[{"kind":"planned",...}]}
//! ...
//! {"termination":{"kind":"completed"}}
//! ```
//!
//! Every tick line carries the observation taken at the start of the tick,
//! the setpoint emitted during it and the chunk-plan events of that tick.
//! The final line records why the loop stopped.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{ActionChunk, Observation, Setpoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RtcEvent {
    /// A chunk was installed at this tick. Its row 0 belongs to
    /// `request_tick`.
    Planned {
        plan: usize,
        request_tick: usize,
        seed: u64,
        chunk: ActionChunk,
        skipped_guidance_steps: usize,
    },
    /// The plan requested at `request_tick` missed its expected completion.
    LateInference { plan: usize, request_tick: usize },
    /// No committed action was left; a hold setpoint was emitted.
    Starvation,
    /// The previous chunk did not cover the frozen prefix of this plan.
    Gap { plan: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: usize,
    pub t: f64,
    pub observation: Observation,
    pub setpoint: Setpoint,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<RtcEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// The binding reported the trial finished.
    Completed,
    /// The tick budget ran out.
    TickLimit,
    /// The simulator or planner aborted.
    Aborted { tag: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub records: Vec<TickRecord>,
    pub termination: Termination,
}

#[derive(Serialize, Deserialize)]
struct TerminationLine {
    termination: Termination,
}

impl TrialLog {
    pub fn events(&self) -> impl Iterator<Item = (usize, &RtcEvent)> {
        self.records
            .iter()
            .flat_map(|r| r.events.iter().map(move |e| (r.tick, e)))
    }

    pub fn count_events(&self, pred: impl Fn(&RtcEvent) -> bool) -> usize {
        self.events().filter(|(_, e)| pred(e)).count()
    }

    /// Consecutive ticks from 0 with increasing times, finite setpoints with
    /// the gripper in `[-1, 1]`, and no starvation.
    pub fn validate(&self) -> Result<()> {
        let mut last_t = f64::NEG_INFINITY;
        for (i, r) in self.records.iter().enumerate() {
            if r.tick != i || !(r.t > last_t) {
                return Err(Error::invalid(format!("record {i}: tick {} at t = {} out of sequence", r.tick, r.t)));
            }
            last_t = r.t;
            let sp = &r.setpoint;
            let finite = sp.position.iter().chain(sp.velocity.iter()).all(|v| v.is_finite()) && sp.yaw.is_finite();
            if !finite || !(-1.0..=1.0).contains(&sp.gripper) {
                return Err(Error::invalid(format!("tick {}: infeasible setpoint", r.tick)));
            }
            if r.events.contains(&RtcEvent::Starvation) {
                return Err(Error::invalid(format!("tick {}: committed queue ran empty", r.tick)));
            }
        }
        Ok(())
    }
}

pub fn write_trial_log<W: Write>(log: &TrialLog, mut w: W) -> Result<()> {
    for r in &log.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    serde_json::to_writer(
        &mut w,
        &TerminationLine {
            termination: log.termination.clone(),
        },
    )?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_trial_log<R: BufRead>(r: R) -> Result<TrialLog> {
    let mut records = Vec::new();
    let mut termination = None;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if termination.is_some() {
            return Err(Error::invalid(format!("line {}: record after termination", i + 1)));
        }
        let value: serde_json::Value = serde_json::from_str(&line)?;
        if value.get("termination").is_some() {
            termination = Some(serde_json::from_value::<TerminationLine>(value)?.termination);
        } else {
            records.push(serde_json::from_value(value)?);
        }
    }
    let termination = termination.ok_or_else(|| Error::invalid("trial log has no termination line"))?;
    Ok(TrialLog { records, termination })
}
