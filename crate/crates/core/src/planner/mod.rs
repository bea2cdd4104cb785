// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Planner backends: the slow, accurate oracle the cache stands in for.

mod delayed;
mod remote;
mod scripted;

pub use delayed::{Delayed, LatencyDist};
pub use remote::RemotePlanner;
pub use scripted::{ScriptedOracle, TOKENS_IN_BASE, TOKENS_IN_PER_ITEM, TOKENS_OUT};

use serde::{Deserialize, Serialize};

use crate::env::{AgentView, Ongoing};
use crate::plan::PlanId;
use crate::state::StateVector;

/// Everything a planner sees, frozen at the tick the query is issued.
#[derive(Debug, Clone)]
pub struct PlannerRequest {
    pub agent_id: u32,
    pub observation: AgentView,
    pub state: StateVector,
    /// Recently executed plans, oldest first.
    pub history: Vec<PlanId>,
    /// The plan running when the query was issued, if any.
    pub ongoing: Option<Ongoing>,
}

impl PlannerRequest {
    pub fn new(observation: AgentView, state: StateVector, history: Vec<PlanId>, ongoing: Option<Ongoing>) -> Self {
        PlannerRequest { agent_id: observation.agent_id, observation, state, history, ongoing }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerResponse {
    pub plan: PlanId,
    pub tokens_in: u32,
    pub tokens_out: u32,
    pub latency_ticks: u32,
    /// Set when a noise wrapper replaced the inner planner's answer.
    #[serde(default)]
    pub corrupted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlannerError {
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
}

pub trait Planner: Send {
    fn plan(&mut self, req: &PlannerRequest) -> Result<PlannerResponse, PlannerError>;
}

impl<P: Planner + ?Sized> Planner for Box<P> {
    fn plan(&mut self, req: &PlannerRequest) -> Result<PlannerResponse, PlannerError> {
        (**self).plan(req)
    }
}

/// Prices per 1000 tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub price_in: f64,
    pub price_out: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { price_in: 0.00125, price_out: 0.01 }
    }
}

impl CostModel {
    pub fn new(price_in: f64, price_out: f64) -> Result<Self, String> {
        if price_in < 0.0 || price_out < 0.0 || !price_in.is_finite() || !price_out.is_finite() {
            return Err("prices must be finite and non-negative".into());
        }
        Ok(CostModel { price_in, price_out })
    }

    pub fn cost(&self, tokens_in: u64, tokens_out: u64) -> f64 {
        tokens_in as f64 * self.price_in / 1000.0 + tokens_out as f64 * self.price_out / 1000.0
    }
}

pub fn cost_of<'a>(responses: impl IntoIterator<Item = &'a PlannerResponse>, model: &CostModel) -> f64 {
    responses
        .into_iter()
        .map(|r| model.cost(r.tokens_in as u64, r.tokens_out as u64))
        .sum()
}
