//! Real-time chunking.
//!
//! Chunks are planned asynchronously while the previous chunk keeps
//! executing at a fixed rate. A plan requested at tick `r` describes ticks
//! `r, r + 1, ...`; its first `b` rows (the ticks that elapse during
//! inference) are frozen to the previous chunk and the following rows are
//! softly pulled toward it through tracking guidance.

mod executor;
mod log;
mod plan;

use serde::{Deserialize, Serialize};

pub use self::log::{read_trial_log, write_trial_log, RtcEvent, Termination, TickRecord, TrialLog};
pub use executor::{execute_loop, execute_loop_threaded, execute_naive, Flow, SimBinding};
pub use plan::{plan_next_chunk, PlanOutput, PlanRequest};

use crate::error::{Error, Result};
use crate::guidance::Schedule;

/// Continuity mask: ones on the frozen prefix `t < b`, `exp(-r (t - b + 1))`
/// over an intermediate region, zeros on a fresh tail.
///
/// The intermediate region holds the `floor(ln(100) / r)` entries that stay
/// at or above 0.01; the fresh tail has length
/// `f = max(1, H - b - floor(ln(100) / r))`, or zero when `b >= H`.
pub fn soft_mask(h: usize, b: usize, decay_rate: f64) -> Vec<f64> {
    let f = fresh_len(h, b, decay_rate);
    (0..h)
        .map(|t| {
            if t < b {
                1.0
            } else if t < h - f {
                (-decay_rate * (t - b + 1) as f64).exp()
            } else {
                0.0
            }
        })
        .collect()
}

/// Length of the zero tail of [`soft_mask`].
pub fn fresh_len(h: usize, b: usize, decay_rate: f64) -> usize {
    if b >= h {
        return 0;
    }
    let n_mid = (100f64.ln() / decay_rate).floor() as usize;
    h.saturating_sub(b + n_mid).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RtcConfig {
    /// Executed chunk horizon.
    pub horizon: usize,
    pub n_denoise: usize,
    /// Execution period, seconds (10 Hz).
    pub exec_dt: f64,
    /// Expected inference latency `b` in action steps; sets the frozen prefix.
    pub delay: usize,
    /// Simulated latency of each plan in action steps. Defaults to `delay`.
    pub latency: Option<usize>,
    pub decay_rate: f64,
    /// Ticks between plan requests. Defaults to the fresh-tail length of the
    /// mask, so the previous chunk covers exactly the non-zero mask entries.
    pub period: Option<usize>,
    pub epsilon_cont: f64,
    /// Schedule of the continuity tracking term.
    pub schedule: Schedule,
}

impl Default for RtcConfig {
    fn default() -> Self {
        RtcConfig {
            horizon: 25,
            n_denoise: 10,
            exec_dt: 0.1,
            delay: 4,
            latency: None,
            decay_rate: 0.5,
            period: None,
            epsilon_cont: 1e-9,
            schedule: Schedule::default(),
        }
    }
}

impl RtcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.delay >= self.horizon {
            return Err(Error::invalid(format!(
                "delay {} must be below the horizon {}",
                self.delay, self.horizon
            )));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return Err(Error::invalid("decay_rate must lie in (0, 1]"));
        }
        if self.n_denoise == 0 || !(self.exec_dt > 0.0) || self.period == Some(0) {
            return Err(Error::invalid("n_denoise, exec_dt and period must be positive"));
        }
        self.schedule.validate()
    }

    pub fn period(&self) -> usize {
        self.period
            .unwrap_or_else(|| fresh_len(self.horizon, self.delay, self.decay_rate))
    }

    pub fn latency(&self) -> usize {
        self.latency.unwrap_or(self.delay)
    }

    pub fn mask(&self) -> Vec<f64> {
        soft_mask(self.horizon, self.delay, self.decay_rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_examples() {
        let w = soft_mask(25, 0, 0.5);
        assert_eq!(w[0], (-0.5f64).exp());
        assert_eq!(soft_mask(25, 25, 0.5), vec![1.0; 25]);
        let w = soft_mask(25, 4, 0.5);
        assert_eq!(&w[..4], &[1.0; 4]);
        assert_eq!(w[4], (-0.5f64).exp());
        assert_eq!(w[5], (-1.0f64).exp());
        assert_eq!(fresh_len(25, 4, 0.5), 12);
        assert!(w[12] >= 0.01 && w[13] == 0.0);
        assert!(w[13..].iter().all(|&v| v == 0.0));
        assert!(w.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn mask_tail_is_never_empty_below_full_freeze() {
        for b in 0..25 {
            assert_eq!(*soft_mask(25, b, 0.1).last().unwrap(), 0.0, "b = {b}");
        }
    }

    #[test]
    fn default_period() {
        let cfg = RtcConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.period(), 12);
        assert_eq!(cfg.latency(), 4);
        let bad = RtcConfig {
            delay: 25,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
