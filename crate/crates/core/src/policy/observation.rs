use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete stand-in for the language prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskToken(pub u8);

impl TaskToken {
    pub const GATE_NAV: TaskToken = TaskToken(0);
    pub const PICK_PLACE: TaskToken = TaskToken(1);
    pub const COMPOSITIONAL: TaskToken = TaskToken(2);
    /// Size of the registry; tokens are `0..COUNT`.
    pub const COUNT: usize = 3;

    pub fn validate(self) -> Result<Self> {
        if (self.0 as usize) < Self::COUNT {
            Ok(self)
        } else {
            Err(Error::invalid(format!("unknown task token {}", self.0)))
        }
    }
}

/// Length of [`Observation::features`].
pub const FEATURE_DIM: usize = 5 + TaskToken::COUNT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub position: Vector3<f64>,
    pub yaw: f64,
    /// Measured gripper aperture, 1 = open.
    pub aperture: f64,
    pub goal: Vector3<f64>,
    pub task_token: TaskToken,
    /// Simulator ground truth. Never part of the policy input.
    #[serde(default)]
    pub payload_attached_truth: bool,
}

impl Observation {
    pub fn new(position: Vector3<f64>, yaw: f64, aperture: f64, goal: Vector3<f64>, task_token: TaskToken) -> Self {
        Observation {
            position,
            yaw,
            aperture,
            goal,
            task_token,
            payload_attached_truth: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.task_token.validate()?;
        if !(0.0..=1.0).contains(&self.aperture) {
            return Err(Error::invalid(format!("aperture {} outside [0, 1]", self.aperture)));
        }
        let finite = self.position.iter().chain(self.goal.iter()).all(|v| v.is_finite())
            && self.yaw.is_finite();
        if !finite {
            return Err(Error::NonFinite { what: "observation" });
        }
        Ok(())
    }

    /// Policy conditioning vector: `(p - goal, yaw, aperture, one-hot token)`.
    pub fn features(&self) -> [f64; FEATURE_DIM] {
        let mut f = [0.0; FEATURE_DIM];
        let rel = self.position - self.goal;
        f[..3].copy_from_slice(rel.as_slice());
        f[3] = self.yaw;
        f[4] = self.aperture;
        let token = self.task_token.0 as usize;
        if token < TaskToken::COUNT {
            f[5 + token] = 1.0;
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_layout() {
        let o = Observation::new(
            Vector3::new(1.0, 2.0, 3.0),
            0.5,
            0.25,
            Vector3::new(0.0, 1.0, 1.0),
            TaskToken::PICK_PLACE,
        );
        assert_eq!(o.features(), [1.0, 1.0, 2.0, 0.5, 0.25, 0.0, 1.0, 0.0]);
        o.validate().unwrap();
        let mut bad = o.clone();
        bad.task_token = TaskToken(9);
        assert!(bad.validate().is_err());
        bad = o;
        bad.aperture = 1.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn truth_flag_defaults_when_absent() {
        let json = r#"{"position":[0,0,1],"yaw":0,"aperture":1,"goal":[1,0,1],"task_token":0}"#;
        let o: Observation = serde_json::from_str(json).unwrap();
        assert!(!o.payload_attached_truth);
    }
}
