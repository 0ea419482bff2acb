//! WebAssembly bindings for the static demo page in `www/`.

use airchunk::guidance::{payload_confidence, Guidance, GuidanceSpec, PayloadSpec, Potential, Schedule};
use airchunk::policy::{sample_chunk, ActionChunk, GaussianField, Observation, TaskToken, ACTION_DIM, DX, DZ};
use airchunk::rtc;
use nalgebra::Vector3;
use wasm_bindgen::prelude::*;

/// `[c_intent, o_intent, c_meas, o_meas, o_flag, alpha]` for the recent
/// gripper commands and the measured aperture, with default thresholds.
#[wasm_bindgen]
pub fn payload_scores(commands: &[f64], aperture: f64) -> Vec<f64> {
    let c = payload_confidence(commands, aperture, &PayloadSpec::default());
    vec![c.c_intent, c.o_intent, c.c_meas, c.o_meas, c.o_flag, c.alpha]
}

/// Continuity weights over a chunk of `h` rows with a frozen prefix of `b`.
#[wasm_bindgen]
pub fn soft_mask(h: usize, b: usize, decay_rate: f64) -> Result<Vec<f64>, String> {
    if b > h || !(decay_rate > 0.0 && decay_rate <= 1.0) {
        return Err(format!("need b <= h and decay_rate in (0, 1], got b={b}, h={h}, decay_rate={decay_rate}"));
    }
    Ok(rtc::soft_mask(h, b, decay_rate))
}

/// Planned altitude offsets of a toy drifting-down chunk policy, sampled
/// without and then with payload guidance. Returns `2 * h` values: row
/// altitudes relative to the start, unguided first.
#[wasm_bindgen]
pub fn guided_altitudes(h: usize, lambda_z: f64, s0: f64, holding: bool, seed: u32) -> Result<Vec<f64>, String> {
    if h == 0 {
        return Err("horizon must be positive".into());
    }
    let run = || -> airchunk::Result<Vec<f64>> {
        let mean = ActionChunk::from_fn(h, ACTION_DIM, |_, d| match d {
            DX => 0.04,
            DZ => -0.008,
            _ => 0.0,
        });
        let field = GaussianField::constant(mean, vec![0.02; ACTION_DIM])?;
        let obs = Observation::new(Vector3::new(0.0, 0.0, 1.0), 0.0, 0.0, Vector3::new(2.0, 0.0, 1.0), TaskToken::PICK_PLACE);
        let payload = PayloadSpec {
            lambda_z,
            ..PayloadSpec::default()
        };
        let spec = GuidanceSpec::new(vec![Potential::Payload(payload)], Schedule::Constant { s0 })?;
        let history = vec![if holding { 1.0 } else { -1.0 }; payload.k];
        let plain = sample_chunk(&field, &obs, 10, seed.into(), None)?;
        let guided = sample_chunk(&field, &obs, 10, seed.into(), Some(Guidance::new(&spec, &history)))?;
        let altitudes = |c: &ActionChunk| {
            c.column(DZ)
                .into_iter()
                .scan(0.0, |z, dz| {
                    *z += dz;
                    Some(*z)
                })
                .collect::<Vec<_>>()
        };
        let mut out = altitudes(&plain);
        out.extend(altitudes(&guided));
        Ok(out)
    };
    run().map_err(|e| e.to_string())
}
