// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Task-state metadata extraction from an agent view.

use std::sync::Arc;

use super::scenario::{Scenario, ScenarioError};
use super::world::{AgentView, ObjectKind};
use crate::state::{FieldSchema, FieldSpec, FieldWidth, StateVector};

/// Fields an environment can report, with their storage width.
pub const FIELDS: &[(&str, FieldWidth)] = &[
    ("steps", FieldWidth::Numeric),
    ("items", FieldWidth::Numeric),
    ("finished", FieldWidth::Numeric),
    ("visited_rooms", FieldWidth::Numeric),
    ("carried", FieldWidth::Numeric),
    ("container_load", FieldWidth::Numeric),
    ("has_container", FieldWidth::Binary),
    ("known_targets", FieldWidth::Numeric),
    ("known_containers", FieldWidth::Numeric),
    ("done", FieldWidth::Binary),
    ("pending", FieldWidth::Binary),
];

pub fn field_width(name: &str) -> Option<FieldWidth> {
    FIELDS.iter().find(|(n, _)| *n == name).map(|&(_, w)| w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Steps,
    Items,
    Finished,
    VisitedRooms,
    Carried,
    ContainerLoad,
    HasContainer,
    KnownTargets,
    KnownContainers,
    Done,
    Pending,
}

impl Field {
    fn parse(name: &str) -> Option<Field> {
        Some(match name {
            "steps" => Field::Steps,
            "items" => Field::Items,
            "finished" => Field::Finished,
            "visited_rooms" => Field::VisitedRooms,
            "carried" => Field::Carried,
            "container_load" => Field::ContainerLoad,
            "has_container" => Field::HasContainer,
            "known_targets" => Field::KnownTargets,
            "known_containers" => Field::KnownContainers,
            "done" => Field::Done,
            "pending" => Field::Pending,
            _ => return None,
        })
    }
}

/// Maps an [`AgentView`] onto a fixed schema of metadata fields.
#[derive(Debug, Clone)]
pub struct MetadataExtractor {
    schema: Arc<FieldSchema>,
    fields: Vec<Field>,
    steps_bucket: u32,
}

impl MetadataExtractor {
    pub fn new(names: &[String], steps_bucket: u32) -> Result<Self, ScenarioError> {
        let mut specs = Vec::with_capacity(names.len());
        let mut fields = Vec::with_capacity(names.len());
        for n in names {
            let f = Field::parse(n).ok_or_else(|| ScenarioError::UnknownField(n.clone()))?;
            let width = field_width(n).expect("known field");
            specs.push(FieldSpec { name: n.clone(), width });
            fields.push(f);
        }
        let schema = FieldSchema::new(specs).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if steps_bucket == 0 {
            return Err(ScenarioError::Invalid("steps_bucket must be positive".into()));
        }
        Ok(MetadataExtractor { schema: Arc::new(schema), fields, steps_bucket })
    }

    pub fn for_scenario(s: &Scenario) -> Result<Self, ScenarioError> {
        Self::new(&s.state_fields, s.steps_bucket)
    }

    pub fn schema(&self) -> &Arc<FieldSchema> {
        &self.schema
    }

    pub fn extract(&self, view: &AgentView) -> StateVector {
        let values = self
            .fields
            .iter()
            .map(|f| match f {
                Field::Steps => (view.tick / self.steps_bucket as u64) as u32,
                Field::Items => view.hands.len() as u32,
                Field::Finished => view.finished,
                Field::VisitedRooms => view.visited.len() as u32,
                Field::Carried => view.carried(),
                Field::ContainerLoad => view.container().map_or(0, |c| c.contents.len() as u32),
                Field::HasContainer => view.container().is_some() as u32,
                Field::KnownTargets => view.known_of(ObjectKind::Target).count() as u32,
                Field::KnownContainers => view.known_of(ObjectKind::Container).count() as u32,
                Field::Done => (view.finished >= view.total_targets) as u32,
                Field::Pending => (view.unclaimed_targets > 0) as u32,
            })
            .collect();
        StateVector::new(self.schema.clone(), values).expect("extracted values fit the schema")
    }
}
