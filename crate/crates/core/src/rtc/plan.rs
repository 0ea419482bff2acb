use super::RtcConfig;
use crate::error::Result;
use crate::guidance::{Guidance, GuidanceSpec, Potential, TrackingSpec};
use crate::policy::{sample_chunk_with_stats, ActionChunk, Observation, VelocityField};

/// Immutable snapshot handed to the planner.
#[derive(Debug, Clone)]
pub struct PlanRequest {
    pub observation: Observation,
    /// Chunk executing when the request was made, with its row 0 at
    /// `shift` ticks before the request.
    pub prev_chunk: Option<ActionChunk>,
    pub shift: usize,
    pub gripper_history: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutput {
    pub chunk: ActionChunk,
    /// The previous chunk did not cover the frozen prefix; sampled without
    /// continuity constraints.
    pub gap: bool,
    pub skipped_guidance_steps: usize,
}

/// Samples the next chunk with continuity guidance toward `prev_chunk`
/// shifted by `shift`, then copies the frozen prefix (rows `t < b`) from it.
///
/// Tracking weights are the soft mask, zeroed on rows the shifted previous
/// chunk does not reach, with unit strength on every column. The tracking
/// term is scheduled by `cfg.schedule`; `guidance_base` keeps its own.
pub fn plan_next_chunk<F: VelocityField + ?Sized>(
    field: &F,
    guidance_base: Option<&GuidanceSpec>,
    req: &PlanRequest,
    cfg: &RtcConfig,
) -> Result<PlanOutput> {
    let (h, d) = field.shape();
    let b = cfg.delay;
    let mut specs: Vec<GuidanceSpec> = guidance_base.into_iter().cloned().collect();
    let mut frozen = None;
    let mut gap = false;
    if let Some(prev) = &req.prev_chunk {
        prev.ensure_shape((h, d))?;
        if b > 0 && req.shift + b > h {
            log::warn!("previous chunk ends before the frozen prefix; planning unconstrained");
            gap = true;
        } else {
            let a_des = prev.shifted(req.shift);
            let weights: Vec<f64> = cfg
                .mask()
                .iter()
                .enumerate()
                .map(|(t, &w)| if t + req.shift < h { w } else { 0.0 })
                .collect();
            if weights.iter().any(|&w| w > 0.0) {
                let tracking = TrackingSpec::new(a_des.clone(), vec![1.0; d], weights)?;
                specs.push(GuidanceSpec {
                    terms: vec![Potential::Tracking(tracking)],
                    schedule: cfg.schedule,
                });
            }
            if b > 0 {
                frozen = Some(a_des);
            }
        }
    }
    let guidance = (!specs.is_empty()).then(|| Guidance::layered(&specs, &req.gripper_history));
    let (mut chunk, stats) = sample_chunk_with_stats(field, &req.observation, cfg.n_denoise, req.seed, guidance)?;
    if let Some(a_des) = frozen {
        for t in 0..b {
            chunk.row_mut(t).copy_from_slice(a_des.row(t));
        }
    }
    Ok(PlanOutput {
        chunk,
        gap,
        skipped_guidance_steps: stats.skipped_guidance_steps,
    })
}
