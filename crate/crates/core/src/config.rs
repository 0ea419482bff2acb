//! Global TOML configuration. Every key is optional; missing keys take the
//! defaults below, unknown keys are rejected.
//!
//! ```toml
//! [drone]      # mass, thrust_coeff, gravity, payload_mass, max_body_rate
//! [gains]      # kp, kd, attitude, yaw, max_tilt
//! [world]      # sim_dt, grasp_radius, payload_ratio, crash_radius
//! [train]      # epochs, lr, betas, batch, seed, hidden, tau_floor, ...
//! [guidance]   # payload_enabled, payload_schedule, [guidance.payload]
//! [rtc]        # horizon, n_denoise, exec_dt, delay, decay_rate, schedule, ...
//! [synth]      # horizon, stride, exec_dt, [synth.randomization], [synth.expert]
//! [eval]       # trials, seed, perturbed_start_box
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControllerGains, DroneParams};
use crate::error::{Error, Result};
use crate::guidance::{PayloadSpec, Schedule};
use crate::harness::{Method, MethodKind, SimParams};
use crate::policy::{TrainConfig, VelocityField};
use crate::rtc::RtcConfig;
use crate::synth::{SynthConfig, WorldConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceConfig {
    pub payload: PayloadSpec,
    /// Turns the payload term of the `rtc+payload` method off, leaving it
    /// equal to `rtc`.
    pub payload_enabled: bool,
    /// Schedule of the payload term. The continuity term uses `rtc.schedule`.
    pub payload_schedule: Schedule,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        GuidanceConfig {
            payload: PayloadSpec::default(),
            payload_enabled: true,
            payload_schedule: Schedule::Constant { s0: 300.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub trials: usize,
    pub seed: u64,
    /// Start-box half-widths for perturbed-start evaluations, meters.
    pub perturbed_start_box: [f64; 3],
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            trials: 20,
            seed: 0,
            perturbed_start_box: [0.5, 1.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub drone: DroneParams,
    pub gains: ControllerGains,
    pub world: WorldConfig,
    pub train: TrainConfig,
    pub guidance: GuidanceConfig,
    pub rtc: RtcConfig,
    pub synth: SynthConfig,
    pub eval: EvalConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.drone.validate()?;
        self.gains.validate()?;
        self.train.validate()?;
        self.guidance.payload.validate()?;
        self.guidance.payload_schedule.validate()?;
        self.rtc.validate()?;
        self.synth.validate()?;
        if self.rtc.horizon != self.synth.horizon {
            return Err(Error::invalid(format!(
                "rtc.horizon {} differs from synth.horizon {}",
                self.rtc.horizon, self.synth.horizon
            )));
        }
        if self.eval.trials == 0 {
            return Err(Error::invalid("eval.trials must be at least 1"));
        }
        Ok(())
    }

    pub fn sim(&self) -> SimParams {
        SimParams {
            drone: self.drone,
            gains: self.gains,
            world: self.world,
        }
    }

    /// Benchmark method over `field` with the payload term of `[guidance]`.
    pub fn method<'a>(
        &self,
        name: impl Into<String>,
        kind: MethodKind,
        field: &'a dyn VelocityField,
    ) -> Result<Method<'a>> {
        let g = &self.guidance;
        let mut method = Method::new(name, kind, field, &g.payload, g.payload_schedule)?;
        if !g.payload_enabled {
            method.guidance = None;
        }
        Ok(method)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        crate::harness::config_digest(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = Config::default();
        assert_eq!(Config::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_override() {
        let cfg = Config::from_toml("[rtc]\ndelay = 2\n[guidance.payload]\nlambda_z = 1.0\n").unwrap();
        assert_eq!(cfg.rtc.delay, 2);
        assert_eq!(cfg.guidance.payload.lambda_z, 1.0);
        assert_eq!(cfg.guidance.payload.delta_z, 0.15);
    }

    #[test]
    fn unknown_and_invalid_keys_rejected() {
        assert!(Config::from_toml("[rtc]\nfoo = 1\n").is_err());
        assert!(Config::from_toml("[rtc]\ndelay = 30\n").is_err());
        assert!(Config::from_toml("[synth]\nhorizon = 20\n").is_err());
    }
}
