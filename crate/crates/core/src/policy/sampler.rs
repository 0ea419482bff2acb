use rand_distr::{Distribution, StandardNormal};

use super::{ActionChunk, Observation, VelocityField};
use crate::error::{Error, Result};
use crate::guidance::{guided_velocity_layered, Guidance};
use crate::rng;

/// Denoising steps per chunk used unless configured otherwise.
pub const DEFAULT_DENOISE_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SampleStats {
    /// Euler steps where the guidance gradient was non-finite and the base
    /// velocity was used instead.
    pub skipped_guidance_steps: usize,
}

/// Draws `x0` from the field's source (standard normal entries in row-major
/// order, shifted and scaled per column) and Euler-integrates
/// the (optionally guided) field over `tau_k = k / n_steps`,
/// `k = 0..n_steps`.
pub fn sample_chunk<F: VelocityField + ?Sized>(
    field: &F,
    obs: &Observation,
    n_steps: usize,
    seed: u64,
    guidance: Option<Guidance<'_>>,
) -> Result<ActionChunk> {
    sample_chunk_with_stats(field, obs, n_steps, seed, guidance).map(|(c, _)| c)
}

pub fn sample_chunk_with_stats<F: VelocityField + ?Sized>(
    field: &F,
    obs: &Observation,
    n_steps: usize,
    seed: u64,
    guidance: Option<Guidance<'_>>,
) -> Result<(ActionChunk, SampleStats)> {
    if n_steps == 0 {
        return Err(Error::invalid("n_steps must be at least 1"));
    }
    let (rows, cols) = field.shape();
    let mut rng = rng::rng(seed);
    let mut x = ActionChunk::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
    if let Some((mean, std)) = field.source() {
        for t in 0..rows {
            for (d, v) in x.row_mut(t).iter_mut().enumerate() {
                *v = mean[d] + std[d] * *v;
            }
        }
    }
    let mut stats = SampleStats::default();
    let dt = 1.0 / n_steps as f64;
    for k in 0..n_steps {
        let tau = k as f64 * dt;
        let v = match guidance {
            Some(g) => {
                let out = guided_velocity_layered(field, &x, obs, tau, g.specs, g.gripper_history);
                if !out.applied {
                    stats.skipped_guidance_steps += 1;
                }
                out.velocity
            }
            None => field.eval(&x, obs, tau),
        };
        x.axpy(dt, &v);
        if !x.is_finite() {
            return Err(Error::NonFiniteSample { tau });
        }
    }
    Ok((x, stats))
}
