use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ActionChunk, MlpArch, MlpField, Observation};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Adam decay rates for the first and second moments.
    pub betas: [f64; 2],
    pub batch: usize,
    pub seed: u64,
    pub hidden: usize,
    pub tau_floor: f64,
    pub holdout_fraction: f64,
    /// Global gradient-norm clip applied per batch.
    pub clip_norm: f64,
    /// Fixed `(x0, tau)` draws per held-out sample.
    pub heldout_draws: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            lr: 1e-3,
            betas: [0.9, 0.999],
            batch: 32,
            seed: 0,
            hidden: 128,
            tau_floor: 0.05,
            holdout_fraction: 0.1,
            clip_norm: 10.0,
            heldout_draws: 4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epochs >= 1
            && self.lr > 0.0
            && self.betas.iter().all(|b| (0.0..1.0).contains(b))
            && self.batch >= 1
            && self.hidden >= 1
            && self.tau_floor > 0.0
            && self.tau_floor < 1.0
            && (0.0..1.0).contains(&self.holdout_fraction)
            && self.clip_norm > 0.0
            && self.heldout_draws >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad training config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Held-out loss before the first update; `None` without a held-out split.
    pub initial_heldout_loss: Option<f64>,
    pub final_heldout_loss: Option<f64>,
    pub n_train: usize,
    pub n_heldout: usize,
}

#[derive(Debug, Clone)]
pub struct TrainedPolicy {
    pub field: MlpField,
    pub report: TrainReport,
}

struct Draw {
    x0: Vec<f64>,
    tau: f64,
}

/// Source draw in action units: `shift + scale * N(0, 1)` per column.
fn draw(rng: &mut rng::Rng, shift: &[f64], scale: &[f64], n: usize) -> Draw {
    let d = scale.len();
    Draw {
        x0: (0..n)
            .map(|i| shift[i % d] + scale[i % d] * Distribution::<f64>::sample(&StandardNormal, &mut *rng))
            .collect(),
        tau: rng.random::<f64>(),
    }
}

fn noisy(x1: &[f64], d: &Draw) -> Vec<f64> {
    d.x0.iter().zip(x1).map(|(a, b)| (1.0 - d.tau) * a + d.tau * b).collect()
}

/// Training loss of one `(o, x1)` pair under one draw; accumulates the
/// parameter gradient into `grads` when given.
///
/// This is the velocity residual weighted by `(1 - tau)^2` and measured in
/// per-column normalized units, i.e. `|(x1_hat - x1) / scale|^2`, averaged
/// over entries.
fn sample_loss(field: &MlpField, obs: &Observation, x1: &[f64], d: &Draw, grads: Option<&mut [f64]>) -> f64 {
    let x = noisy(x1, d);
    let act = field.forward(field.input(&x, obs, d.tau));
    let (shift, scale) = (field.shift(), field.scale());
    let ad = scale.len();
    let n = x.len() as f64;
    let resid: Vec<f64> = act
        .out
        .iter()
        .zip(x1)
        .enumerate()
        .map(|(i, (y, a1))| y - (a1 - shift[i % ad]) / scale[i % ad])
        .collect();
    let loss = resid.iter().map(|r| r * r).sum::<f64>() / n;
    if let Some(g) = grads {
        let d_out: Vec<f64> = resid.iter().map(|r| 2.0 * r / n).collect();
        field.backward(&act, &d_out, Some(g));
    }
    loss
}

/// Training objective over `draws` seeded `(x0, tau)` pairs per sample.
///
/// With `x_tau = (1 - tau) x0 + tau x1`, `x0` from the field's source and
/// `tau ~ U(0, 1)`, this is `E |(1 - tau) (v(x_tau, o, tau) - (x1 - x0)) / scale|^2`
/// for `tau` below the floor, where it equals the normalized clean-chunk error.
/// It has the same minimizer as the unweighted velocity loss.
pub fn flow_matching_loss(field: &MlpField, data: &[(Observation, ActionChunk)], draws: usize, seed: u64) -> f64 {
    mean_over_draws(field, data, draws, seed, |obs, x1, d| {
        sample_loss(field, obs, x1, d, None)
    })
}

/// Unweighted conditional flow-matching loss `E |v(x_tau, o, tau) - (x1 - x0)|^2`
/// in raw action units. Near `tau = 1` it is dominated by the irreducible
/// variance of `x0`, so it barely moves when the actions are small.
pub fn velocity_matching_loss(field: &MlpField, data: &[(Observation, ActionChunk)], draws: usize, seed: u64) -> f64 {
    mean_over_draws(field, data, draws, seed, |obs, x1, d| {
        let x = noisy(x1, d);
        let act = field.forward(field.input(&x, obs, d.tau));
        let v = field.velocity_from(&x, &act.out, d.tau);
        let r2: f64 = v.iter().zip(x1.iter().zip(&d.x0)).map(|(vi, (a1, a0))| (vi - (a1 - a0)).powi(2)).sum();
        r2 / x.len() as f64
    })
}

fn mean_over_draws(
    field: &MlpField,
    data: &[(Observation, ActionChunk)],
    draws: usize,
    seed: u64,
    f: impl Fn(&Observation, &[f64], &Draw) -> f64,
) -> f64 {
    let mut rng = rng::rng(seed);
    let mut total = 0.0;
    for (obs, chunk) in data {
        for _ in 0..draws {
            let d = draw(&mut rng, field.shift(), field.scale(), field.arch().chunk_len());
            total += f(obs, chunk.as_slice(), &d);
        }
    }
    total / (data.len() * draws).max(1) as f64
}

/// Per-column mean and standard deviation (floored at 1e-3) over all rows.
fn normalization(data: &[&(Observation, ActionChunk)], cols: usize) -> (Vec<f64>, Vec<f64>) {
    let mut sum = vec![0.0; cols];
    let mut sq = vec![0.0; cols];
    let mut count = 0.0;
    for (_, c) in data {
        for t in 0..c.rows() {
            for (d, v) in c.row(t).iter().enumerate() {
                sum[d] += v;
                sq[d] += v * v;
            }
            count += 1.0;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
    let std = sq
        .iter()
        .zip(&mean)
        .map(|(s, m)| (s / count - m * m).max(0.0).sqrt().max(1e-3))
        .collect();
    (mean, std)
}

/// Fits an [`MlpField`] with mini-batch Adam on the conditional
/// flow-matching objective.
///
/// The last `holdout_fraction` of a seeded shuffle is held out. Per-sample
/// gradients may be evaluated in parallel; they are always summed in batch
/// order, so results do not depend on the thread count.
pub fn train_flow_matching(data: &[(Observation, ActionChunk)], cfg: &TrainConfig) -> Result<TrainedPolicy> {
    cfg.validate()?;
    let Some((_, first)) = data.first() else {
        return Err(Error::invalid("empty dataset"));
    };
    let (rows, cols) = first.shape();
    for (obs, c) in data {
        c.ensure_shape((rows, cols))?;
        obs.validate()?;
        if !c.is_finite() {
            return Err(Error::NonFinite { what: "training chunk" });
        }
    }

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng::rng(rng::split(cfg.seed, 0)));
    let n_heldout = if data.len() >= 2 {
        ((data.len() as f64 * cfg.holdout_fraction).round() as usize).min(data.len() - 1)
    } else {
        0
    };
    let (train_idx, held_idx) = order.split_at(data.len() - n_heldout);
    let train: Vec<&(Observation, ActionChunk)> = train_idx.iter().map(|&i| &data[i]).collect();
    let heldout: Vec<(Observation, ActionChunk)> = held_idx.iter().map(|&i| data[i].clone()).collect();

    let (shift, scale) = normalization(&train, cols);
    let arch = MlpArch::new(rows, cols, cfg.hidden);
    let mut field = MlpField::init(arch, shift, scale, cfg.tau_floor, rng::split(cfg.seed, 1));
    let held_seed = rng::split(cfg.seed, 2);
    let held_loss = |f: &MlpField| (!heldout.is_empty()).then(|| flow_matching_loss(f, &heldout, cfg.heldout_draws, held_seed));
    let initial_heldout_loss = held_loss(&field);

    let n_params = arch.param_count();
    let n_entries = arch.chunk_len();
    let mut m1 = vec![0.0; n_params];
    let mut m2 = vec![0.0; n_params];
    let mut step = 0i32;
    let mut grads = vec![0.0; n_params];
    let mut scratch = vec![0.0; n_params];
    let mut rng = rng::rng(rng::split(cfg.seed, 3));
    let mut epoch_order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        epoch_order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in epoch_order.chunks(cfg.batch).enumerate() {
            let draws: Vec<Draw> = batch.iter().map(|_| draw(&mut rng, field.shift(), field.scale(), n_entries)).collect();
            grads.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0;
            let per_sample = |i: usize, out: &mut [f64]| {
                let (obs, chunk) = train[batch[i]];
                sample_loss(&field, obs, chunk.as_slice(), &draws[i], Some(out))
            };
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                let parts: Vec<(f64, Vec<f64>)> = (0..batch.len())
                    .into_par_iter()
                    .map(|i| {
                        let mut g = vec![0.0; n_params];
                        let l = per_sample(i, &mut g);
                        (l, g)
                    })
                    .collect();
                for (l, g) in parts {
                    loss += l;
                    grads.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                }
                let _ = &mut scratch;
            }
            #[cfg(not(feature = "parallel"))]
            for i in 0..batch.len() {
                scratch.iter_mut().for_each(|g| *g = 0.0);
                loss += per_sample(i, &mut scratch);
                grads.iter_mut().zip(&scratch).for_each(|(a, b)| *a += b);
            }
            let inv = 1.0 / batch.len() as f64;
            loss *= inv;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            epoch_loss += loss * batch.len() as f64;
            let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt() * inv;
            let k = inv * if norm > cfg.clip_norm { cfg.clip_norm / norm } else { 1.0 };
            step += 1;
            let [b1, b2] = cfg.betas;
            let (c1, c2) = (1.0 - b1.powi(step), 1.0 - b2.powi(step));
            for (((p, m), v), g) in field.params_mut().iter_mut().zip(&mut m1).zip(&mut m2).zip(&grads) {
                let g = k * g;
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= cfg.lr * (*m / c1) / ((*v / c2).sqrt() + 1e-8);
            }
        }
        let mean = epoch_loss / train.len() as f64;
        log::debug!("epoch {epoch}: loss {mean:.5}");
        epoch_losses.push(mean);
    }

    let final_heldout_loss = held_loss(&field);
    Ok(TrainedPolicy {
        field,
        report: TrainReport {
            epoch_losses,
            initial_heldout_loss,
            final_heldout_loss,
            n_train: train.len(),
            n_heldout,
        },
    })
}
