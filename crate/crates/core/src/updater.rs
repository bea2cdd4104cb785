// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Background validation of cache decisions against delayed oracle answers.
//!
//! One query may be in flight per agent. Its answer is matched against the
//! plans executed since it was issued: a match confirms the transition that
//! produced it, anything else corrects the transition that was running at
//! issue time. Confirmation and correction each hold further queries back
//! until a designated plan completes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::cache::{CacheError, PlanCache};
use crate::plan::{PlanId, PlanKind};
use crate::state::StateVector;
use crate::trace::HoldKind;

pub const DEFAULT_QUERY_PERIOD: u64 = 5;
/// Longest trajectory kept for matching.
pub const WINDOW_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdaterConfig {
    pub query_period: u64,
    /// Apply cache edits from oracle answers.
    pub updates: bool,
    /// Replace the running plan on correction.
    pub replacement: bool,
}

impl Default for UpdaterConfig {
    fn default() -> Self {
        UpdaterConfig { query_period: DEFAULT_QUERY_PERIOD, updates: true, replacement: true }
    }
}

impl UpdaterConfig {
    /// With both mechanisms off the updater issues no background queries.
    pub fn is_static(&self) -> bool {
        !self.updates && !self.replacement
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingQuery {
    pub query_id: u64,
    pub issued_at: u64,
    /// `c_t`: metadata at issue time.
    pub context: StateVector,
    /// `p_t`: the running plan, its serial and its cache-key predecessor.
    pub active: Option<(PlanId, u64, PlanKind)>,
    /// Set for the blocking query of a cache miss.
    pub miss: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suppression {
    None,
    Hold { kind: HoldKind, until_serial: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct WindowEntry {
    serial: u64,
    plan: PlanId,
    pred: PlanKind,
    state: StateVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueDecision {
    Issue,
    Suppressed(HoldKind),
    Wait,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolutionOutcome {
    /// Matched the plan with this serial.
    Confirmed { matched: u64 },
    /// The transition `pred -> wrong` was replaced by `pred -> response`.
    Corrected { pred: PlanKind, wrong: PlanKind },
    MissInsert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("response to query {got} does not match the outstanding query")]
pub struct StaleResponse {
    pub got: u64,
}

#[derive(Debug, Clone)]
pub struct Updater {
    cfg: UpdaterConfig,
    outstanding: Option<PendingQuery>,
    suppression: Suppression,
    last_issue: Option<u64>,
    window: VecDeque<WindowEntry>,
    suppressed_noted: bool,
    stale: u64,
}

impl Updater {
    pub fn new(cfg: UpdaterConfig) -> Self {
        Updater {
            cfg,
            outstanding: None,
            suppression: Suppression::None,
            last_issue: None,
            window: VecDeque::new(),
            suppressed_noted: false,
            stale: 0,
        }
    }

    pub fn config(&self) -> &UpdaterConfig {
        &self.cfg
    }

    pub fn outstanding(&self) -> Option<&PendingQuery> {
        self.outstanding.as_ref()
    }

    pub fn suppression(&self) -> Suppression {
        self.suppression
    }

    pub fn stale_count(&self) -> u64 {
        self.stale
    }

    /// Whether a background query should go out at `now`. A suppressed slot is
    /// reported once per hold.
    pub fn poll(&mut self, now: u64) -> IssueDecision {
        if self.cfg.is_static() || self.outstanding.is_some() {
            return IssueDecision::Wait;
        }
        let due = self.last_issue.is_none_or(|t| now.saturating_sub(t) >= self.cfg.query_period);
        match self.suppression {
            Suppression::Hold { kind, .. } if due && !self.suppressed_noted => {
                self.suppressed_noted = true;
                IssueDecision::Suppressed(kind)
            }
            Suppression::Hold { .. } => IssueDecision::Wait,
            Suppression::None if due => IssueDecision::Issue,
            Suppression::None => IssueDecision::Wait,
        }
    }

    /// Records a periodic query for the running plan `p_t`.
    pub fn record_issue(&mut self, query_id: u64, now: u64, context: StateVector, serial: u64, plan: PlanId, pred: PlanKind) {
        debug_assert!(self.outstanding.is_none());
        self.window.clear();
        self.window.push_back(WindowEntry { serial, plan, pred, state: context.clone() });
        self.outstanding =
            Some(PendingQuery { query_id, issued_at: now, context, active: Some((plan, serial, pred)), miss: false });
        self.last_issue = Some(now);
    }

    /// Records the blocking query of a cache miss. Any periodic query still in
    /// flight must be abandoned first.
    pub fn record_miss(&mut self, query_id: u64, now: u64, context: StateVector) {
        debug_assert!(self.outstanding.is_none());
        self.window.clear();
        self.outstanding = Some(PendingQuery { query_id, issued_at: now, context, active: None, miss: true });
        self.last_issue = Some(now);
    }

    pub fn on_plan_start(&mut self, serial: u64, plan: PlanId, pred: PlanKind, state: &StateVector) {
        if self.outstanding.as_ref().is_some_and(|q| !q.miss) {
            if self.window.len() == WINDOW_CAP {
                self.window.pop_front();
            }
            self.window.push_back(WindowEntry { serial, plan, pred, state: state.clone() });
        }
    }

    /// Releases a hold bound to `serial`. The period timer restarts at release.
    pub fn on_plan_closed(&mut self, serial: u64, now: u64) -> bool {
        match self.suppression {
            Suppression::Hold { until_serial, .. } if until_serial == serial => {
                self.suppression = Suppression::None;
                self.suppressed_noted = false;
                self.last_issue = Some(now);
                true
            }
            _ => false,
        }
    }

    pub fn set_hold(&mut self, kind: HoldKind, until_serial: u64) {
        self.suppression = Suppression::Hold { kind, until_serial };
        self.suppressed_noted = false;
    }

    /// Checks a response against the outstanding query, dropping it when it
    /// belongs to another one.
    pub fn take(&mut self, query_id: u64) -> Result<PendingQuery, StaleResponse> {
        match &self.outstanding {
            Some(q) if q.query_id == query_id => Ok(self.outstanding.take().expect("present")),
            _ => {
                self.stale += 1;
                Err(StaleResponse { got: query_id })
            }
        }
    }

    /// Drops everything in flight, e.g. when the agent's episode ends.
    pub fn abandon(&mut self) {
        if self.outstanding.take().is_some() {
            self.stale += 1;
        }
        self.window.clear();
    }

    /// Classifies the answer `p'` to `q` and applies the cache edits.
    ///
    /// `running` is the plan executing now. Confirmation needs a full-instance
    /// match among the plans executed since issue; the most recent match is used.
    pub fn resolve(
        &mut self,
        q: &PendingQuery,
        response: PlanId,
        running: Option<(u64, PlanId, PlanKind, &StateVector)>,
        cache: &mut PlanCache,
    ) -> Result<ResolutionOutcome, CacheError> {
        if q.miss {
            return Ok(ResolutionOutcome::MissInsert);
        }
        let mut matched = self
            .window
            .iter()
            .rev()
            .find(|w| w.plan == response)
            .map(|w| (w.serial, w.pred, w.state.clone()));
        if matched.is_none() {
            if let Some((serial, plan, pred, state)) = running {
                if plan == response {
                    matched = Some((serial, pred, state.clone()));
                }
            }
        }
        self.window.clear();
        match matched {
            Some((serial, pred, state)) => {
                if self.cfg.updates {
                    cache.reinforce(pred, response.kind(), &state)?;
                }
                Ok(ResolutionOutcome::Confirmed { matched: serial })
            }
            None => {
                let (wrong, _, pred) = q.active.expect("periodic queries record the running plan");
                if self.cfg.updates {
                    cache.reinforce(pred, response.kind(), &q.context)?;
                    cache.penalize(pred, wrong.kind());
                }
                Ok(ResolutionOutcome::Corrected { pred, wrong: wrong.kind() })
            }
        }
    }
}
