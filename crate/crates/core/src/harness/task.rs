use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::TaskToken;
use crate::synth::{Scene, TaskKind};

/// Rubric stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Gate,
    Hover,
    Pick,
    Place,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Gate => "gate",
            Stage::Hover => "hover",
            Stage::Pick => "pick",
            Stage::Place => "place",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered rubric stages of a task kind; each stage's prerequisite is the
/// one before it.
pub fn stages(kind: TaskKind) -> &'static [Stage] {
    match kind {
        TaskKind::GateNav => &[Stage::Gate, Stage::Hover],
        TaskKind::PickPlace => &[Stage::Pick, Stage::Place],
        TaskKind::Compositional => &[Stage::Gate, Stage::Hover, Stage::Pick, Stage::Place],
    }
}

/// Detector thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageParams {
    pub hover_radius: f64,
    /// Continuous time inside the hover radius, seconds.
    pub hover_duration: f64,
    pub grasp_radius: f64,
}

impl Default for StageParams {
    fn default() -> Self {
        StageParams {
            hover_radius: 0.3,
            hover_duration: 2.0,
            grasp_radius: 0.1,
        }
    }
}

/// Evaluation task, read from JSON.
///
/// Per trial the start is perturbed inside `start_box` and `start_yaw`, and
/// the object is placed inside `object_box` around the scene object. The
/// hover point is `object + (0, 0, hover_height)`; the place region is the
/// scene bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub name: String,
    pub kind: TaskKind,
    pub scene: Scene,
    /// Half-widths of the per-trial object box.
    #[serde(default)]
    pub object_box: [f64; 3],
    /// Half-widths of the per-trial start position box.
    #[serde(default)]
    pub start_box: [f64; 3],
    #[serde(default)]
    pub start_yaw: f64,
    pub hover_height: f64,
    /// Release point height above the bin rim, shown as the goal once the
    /// gripper has closed.
    #[serde(default = "default_release_height")]
    pub release_height: f64,
    /// Payload mass as a fraction of the airframe mass.
    #[serde(default = "default_payload_ratio")]
    pub payload_ratio: f64,
    /// Trial time limit, seconds.
    pub time_limit: f64,
    #[serde(default)]
    pub stages: StageParams,
}

fn default_release_height() -> f64 {
    0.5
}

fn default_payload_ratio() -> f64 {
    0.3
}

impl TaskSpec {
    pub fn gate_nav() -> Self {
        TaskSpec {
            name: "gate_nav".into(),
            kind: TaskKind::GateNav,
            scene: Scene::gate_default(),
            object_box: [0.0; 3],
            start_box: [0.0; 3],
            start_yaw: 0.0,
            hover_height: 1.25,
            release_height: default_release_height(),
            payload_ratio: default_payload_ratio(),
            time_limit: 30.0,
            stages: StageParams::default(),
        }
    }

    pub fn pick_place() -> Self {
        TaskSpec {
            name: "pick_place".into(),
            kind: TaskKind::PickPlace,
            scene: Scene::pick_place_default(),
            object_box: [0.2, 0.2, 0.0],
            start_box: [0.2, 0.2, 0.2],
            time_limit: 40.0,
            ..Self::gate_nav()
        }
    }

    /// Gate, then pick and place. The hover stage is the pause over the
    /// pregrasp point, so it uses a shorter hold.
    pub fn compositional() -> Self {
        TaskSpec {
            name: "compositional".into(),
            kind: TaskKind::Compositional,
            scene: Scene::gate_default(),
            object_box: [0.2, 0.2, 0.0],
            hover_height: 0.3,
            time_limit: 60.0,
            stages: StageParams {
                hover_duration: 1.0,
                ..StageParams::default()
            },
            ..Self::gate_nav()
        }
    }

    pub fn token(&self) -> TaskToken {
        self.kind.token()
    }

    pub fn stages(&self) -> &'static [Stage] {
        stages(self.kind)
    }

    pub fn hover_point(&self, object: &Vector3<f64>) -> Vector3<f64> {
        object + Vector3::new(0.0, 0.0, self.hover_height)
    }

    pub fn bin_point(&self) -> Vector3<f64> {
        self.scene.bin.center + Vector3::new(0.0, 0.0, self.release_height)
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        let nonneg = self
            .object_box
            .iter()
            .chain(&self.start_box)
            .chain([&self.start_yaw])
            .all(|&v| v >= 0.0 && v.is_finite());
        let s = &self.stages;
        let ok = nonneg
            && self.hover_height.is_finite()
            && self.release_height.is_finite()
            && self.payload_ratio >= 0.0
            && self.time_limit > 0.0
            && s.hover_radius > 0.0
            && s.hover_duration >= 0.0
            && s.grasp_radius > 0.0;
        if !ok {
            return Err(Error::invalid(format!("task {:?} has degenerate parameters", self.name)));
        }
        if self.kind.manipulates() && !self.scene.bin.contains_release(&self.bin_point()) {
            return Err(Error::invalid("bin release point lies outside the place region"));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: TaskSpec = serde_json::from_str(s)?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        for t in [TaskSpec::gate_nav(), TaskSpec::pick_place(), TaskSpec::compositional()] {
            t.validate().unwrap();
            let s = serde_json::to_string(&t).unwrap();
            assert_eq!(TaskSpec::from_json(&s).unwrap(), t);
        }
    }

    #[test]
    fn stage_order() {
        assert_eq!(stages(TaskKind::GateNav), &[Stage::Gate, Stage::Hover]);
        assert_eq!(stages(TaskKind::Compositional).len(), 4);
    }

    #[test]
    fn rejects_degenerate() {
        let mut t = TaskSpec::pick_place();
        t.stages.hover_radius = 0.0;
        assert!(t.validate().is_err());
        let mut t = TaskSpec::pick_place();
        t.release_height = 5.0;
        assert!(t.validate().is_err());
    }
}
