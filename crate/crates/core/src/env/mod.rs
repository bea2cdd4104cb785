// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Multi-agent transport gridworld.

pub mod compile;
pub mod layout;
pub mod metadata;
pub mod policy;
pub mod scenario;
pub mod world;

pub use compile::{compile, legal_plans, NotExecutable, PlanInstance};
pub use layout::{Dir, Layout, Pos};
pub use metadata::MetadataExtractor;
pub use policy::{reference_plan, resolve, Ongoing};
pub use scenario::{Scenario, ScenarioError};
pub use world::{success_metric, AgentView, ObjectKind, Primitive, World};
