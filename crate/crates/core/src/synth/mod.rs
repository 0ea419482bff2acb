//! Domain-randomized expert demonstrations.
//!
//! A [`WaypointPlan`] routes the vehicle from a perturbed start, optionally
//! via a recovery waypoint beside a gate edge, through the gate to a
//! randomized hover goal or through a grasp and a release. [`track_plan`]
//! flies it with the setpoint controller and [`actions_from_states`] cuts
//! the rollout into `(Observation, ActionChunk)` pairs.
//!
//! Seeds: rollout `i` of a dataset with master seed `s` draws its
//! perturbation from `split(s, i)` and shares the nominal draw of group
//! `j = i / n_s`, seeded by `split(s, NOMINAL_STREAM + j)`.

mod dataset;
mod expert;
mod plan;
mod scene;
mod world;

use serde::{Deserialize, Serialize};
use std::str::FromStr;

pub use dataset::{
    actions_from_states, generate_dataset, read_dataset, read_manifest, validate_dataset, write_dataset,
    write_manifest, Dataset, DatasetRecord, RolloutStatus, RolloutSummary, SynthConfig, Validation, NOMINAL_STREAM,
};
pub use expert::{track_plan, ExpertConfig, ExpertRollout, RolloutSample};
pub use plan::{
    ball_offset, build_plan, build_plan_from, draw_nominal, plan_is_clear, randomize_after_gate, randomize_goal,
    recovery_waypoint, NominalDraw, Perturbation, RandomizationConfig, Waypoint, WaypointPlan,
};
pub use scene::{point_segment_distance, segment_segment_distance, BinRegion, Crossing, GateGeometry, Scene, Side};
pub use world::{World, WorldConfig, WorldEvent};

use crate::error::{Error, Result};
use crate::policy::TaskToken;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    GateNav,
    PickPlace,
    Compositional,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::GateNav, TaskKind::PickPlace, TaskKind::Compositional];

    pub fn token(self) -> TaskToken {
        match self {
            TaskKind::GateNav => TaskToken::GATE_NAV,
            TaskKind::PickPlace => TaskToken::PICK_PLACE,
            TaskKind::Compositional => TaskToken::COMPOSITIONAL,
        }
    }

    pub fn traverses_gate(self) -> bool {
        matches!(self, TaskKind::GateNav | TaskKind::Compositional)
    }

    pub fn manipulates(self) -> bool {
        matches!(self, TaskKind::PickPlace | TaskKind::Compositional)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::GateNav => "gate_nav",
            TaskKind::PickPlace => "pick_place",
            TaskKind::Compositional => "compositional",
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown task {s:?}")))
    }
}
