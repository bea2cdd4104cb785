// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

use super::{Planner, PlannerError, PlannerRequest, PlannerResponse};
use crate::env::reference_plan;

pub const TOKENS_IN_BASE: u32 = 50;
pub const TOKENS_IN_PER_ITEM: u32 = 2;
pub const TOKENS_OUT: u32 = 12;

/// Deterministic reference planner running the environment's greedy policy.
/// Token counts are synthetic: a fixed prompt plus two tokens per object in
/// the observation, and a fixed-size answer.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedOracle;

impl Planner for ScriptedOracle {
    fn plan(&mut self, req: &PlannerRequest) -> Result<PlannerResponse, PlannerError> {
        let v = &req.observation;
        let items = (v.known.len() + v.hands.len()) as u32;
        Ok(PlannerResponse {
            plan: reference_plan(v, req.ongoing.as_ref()),
            tokens_in: TOKENS_IN_BASE + TOKENS_IN_PER_ITEM * items,
            tokens_out: TOKENS_OUT,
            latency_ticks: 0,
            corrupted: false,
        })
    }
}
