// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Scenario files (JSON, schema tag `scenario v1`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layout::{Layout, LayoutError, Pos};
use super::world::ObjectKind;

pub const SCENARIO_SCHEMA: &str = "scenario v1";

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("reading scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported scenario schema `{0}`")]
    Schema(String),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("unknown state field `{0}`")]
    UnknownField(String),
    #[error("{0}")]
    Invalid(String),
}

/// Primitive tick costs of the manipulation steps. Movement is one tick per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Durations {
    pub grasp: u32,
    pub put: u32,
    pub look: u32,
    pub deposit: u32,
}

impl Default for Durations {
    fn default() -> Self {
        Durations { grasp: 1, put: 1, look: 1, deposit: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: u32,
    pub pos: [u16; 2],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: u32,
    pub kind: ObjectKind,
    pub pos: [u16; 2],
}

/// Objects placed uniformly at random (per seed) on room cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomObjects {
    pub targets: u32,
    pub containers: u32,
    /// Rooms that never receive random objects.
    #[serde(default)]
    pub exclude_rooms: Vec<u32>,
    /// First id handed out; ids then increase by one.
    #[serde(default)]
    pub first_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema: String,
    pub name: String,
    pub layout: Vec<String>,
    pub goal: Vec<[u16; 2]>,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub random_objects: Option<RandomObjects>,
    pub budget: u64,
    #[serde(default)]
    pub perturbation_rate: f64,
    #[serde(default)]
    pub durations: Durations,
    /// Metadata fields used as cache filter keys, in order.
    #[serde(default = "default_fields")]
    pub state_fields: Vec<String>,
    /// Divisor applied to the tick count for the `steps` field.
    #[serde(default = "one")]
    pub steps_bucket: u32,
}

fn one() -> u32 {
    1
}

fn default_fields() -> Vec<String> {
    ["steps", "items", "finished", "visited_rooms"].iter().map(|s| s.to_string()).collect()
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema != SCENARIO_SCHEMA {
            return Err(ScenarioError::Schema(self.schema.clone()));
        }
        let layout = self.build_layout()?;
        if self.agents.is_empty() {
            return Err(ScenarioError::Invalid("scenario has no agents".into()));
        }
        for (i, a) in self.agents.iter().enumerate() {
            if a.id as usize != i {
                return Err(ScenarioError::Invalid("agent ids must be 0..n in order".into()));
            }
            let p = Pos::new(a.pos[0], a.pos[1]);
            if !layout.is_walkable(p) {
                return Err(LayoutError::BadCell { x: p.x, y: p.y }.into());
            }
        }
        let mut ids: Vec<u32> = self.objects.iter().map(|o| o.id).collect();
        for o in &self.objects {
            let p = Pos::new(o.pos[0], o.pos[1]);
            if !layout.is_walkable(p) {
                return Err(LayoutError::BadCell { x: p.x, y: p.y }.into());
            }
        }
        if let Some(r) = &self.random_objects {
            ids.extend(r.first_id..r.first_id + r.targets + r.containers);
            if layout
                .room_cells_outside_goal()
                .iter()
                .all(|p| layout.room_at(*p).is_some_and(|id| r.exclude_rooms.contains(&id)))
            {
                return Err(ScenarioError::Invalid("no cells available for random objects".into()));
            }
        }
        let n = ids.len();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != n {
            return Err(ScenarioError::Invalid("duplicate object ids".into()));
        }
        if !(0.0..=1.0).contains(&self.perturbation_rate) {
            return Err(ScenarioError::Invalid("perturbation_rate must lie in [0, 1]".into()));
        }
        if self.steps_bucket == 0 {
            return Err(ScenarioError::Invalid("steps_bucket must be positive".into()));
        }
        for f in &self.state_fields {
            if super::metadata::field_width(f).is_none() {
                return Err(ScenarioError::UnknownField(f.clone()));
            }
        }
        Ok(())
    }

    pub fn build_layout(&self) -> Result<Layout, ScenarioError> {
        let goal: Vec<Pos> = self.goal.iter().map(|g| Pos::new(g[0], g[1])).collect();
        Ok(Layout::parse(&self.layout, &goal)?)
    }
}
