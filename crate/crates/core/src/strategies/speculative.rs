// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Draft-then-verify execution.
//!
//! A small drafter proposes `depth` plans which run immediately. The oracle
//! then checks every draft against the state it was drafted in; the longest
//! agreeing prefix is kept and the rest is undone in reverse order.

use std::collections::{HashMap, VecDeque};

use crate::env::compile;
use crate::env::compile::{compile_undo, UndoRecord};
use crate::plan::PlanId;
use crate::planner::{PlannerError, PlannerRequest};
use crate::sim::{BlockCause, Closed, Delivery, Kernel, PlannerSlot, Strategy};
use crate::trace::{Event, QueryPurpose, StallCause};

/// Mean number of drafts undone per window when each draft is wrong with
/// probability `e` independently.
pub fn expected_rollback_depth(e: f64, depth: u32) -> f64 {
    (1..=depth).map(|i| (1.0 - e).powi(i as i32 - 1) * e * (depth - i + 1) as f64).sum()
}

#[derive(Debug, Clone)]
struct Draft {
    req: PlannerRequest,
    serial: u64,
    undo: UndoRecord,
}

#[derive(Debug, Clone)]
enum Phase {
    Drafting,
    Verifying { queries: Vec<u64>, answers: Vec<Option<PlanId>> },
    /// Drafts still to undo with their serials, then the corrected plan.
    RollingBack { undo: VecDeque<(u64, UndoRecord)>, then: Option<PlanId> },
}

#[derive(Debug, Clone)]
struct AgentState {
    phase: Phase,
    drafts: Vec<Draft>,
    /// Request of the draft query in flight.
    pending_draft: Option<PlannerRequest>,
}

pub struct Speculative {
    depth: usize,
    agents: Vec<AgentState>,
    /// Running undo plans by serial, with their agent and the draft they revert.
    rollbacks: HashMap<u64, (usize, u64)>,
}

impl Speculative {
    pub fn new(agents: usize, depth: u32) -> Self {
        let s = AgentState { phase: Phase::Drafting, drafts: Vec::new(), pending_draft: None };
        Speculative { depth: depth.max(1) as usize, agents: vec![s; agents], rollbacks: HashMap::new() }
    }

    fn verify(&mut self, k: &mut Kernel, a: usize) -> Result<(), PlannerError> {
        let reqs: Vec<PlannerRequest> = self.agents[a].drafts.iter().map(|d| d.req.clone()).collect();
        let mut queries = Vec::with_capacity(reqs.len());
        for r in &reqs {
            queries.push(k.issue(a, QueryPurpose::Verify, PlannerSlot::Oracle, r)?);
        }
        let last = *queries.last().expect("at least one draft");
        let n = queries.len();
        self.agents[a].phase = Phase::Verifying { queries, answers: vec![None; n] };
        k.block(a, last, BlockCause::Stall(StallCause::Verify));
        Ok(())
    }

    fn finish_verify(&mut self, k: &mut Kernel, a: usize, answers: Vec<PlanId>) {
        k.unblock(a);
        let st = &mut self.agents[a];
        let drafts = std::mem::take(&mut st.drafts);
        let accepted = drafts.iter().zip(&answers).take_while(|(d, ans)| d.undo.plan == **ans).count();
        k.emit(Some(a), Event::Verify { drafted: drafts.len() as u32, accepted: accepted as u32 });
        let undo: VecDeque<(u64, UndoRecord)> = drafts[accepted..].iter().rev().map(|d| (d.serial, d.undo)).collect();
        let then = answers.get(accepted).copied();
        st.phase = Phase::RollingBack { undo, then };
    }

    /// Runs the next undo plan, or the corrected plan once nothing is left to undo.
    fn roll_back(&mut self, k: &mut Kernel, a: usize) -> Result<(), PlannerError> {
        let Phase::RollingBack { undo, then } = &mut self.agents[a].phase else { unreachable!() };
        let view = k.view(a);
        while let Some((draft, rec)) = undo.pop_front() {
            k.emit(Some(a), Event::RollbackStart { plan: rec.plan, serial: draft });
            match compile_undo(&rec, &view) {
                Some(inst) => {
                    let serial = k.start_with(a, inst, &view);
                    self.rollbacks.insert(serial, (a, draft));
                    return Ok(());
                }
                // Nothing left to revert: the span is empty.
                None => k.emit(Some(a), Event::RollbackEnd { serial: draft }),
            }
        }
        let then = then.take();
        self.agents[a].phase = Phase::Drafting;
        match then.map(|p| compile(p, &view)) {
            Some(Ok(inst)) => {
                k.start_with(a, inst, &view);
                Ok(())
            }
            _ => self.draft(k, a),
        }
    }

    fn draft(&mut self, k: &mut Kernel, a: usize) -> Result<(), PlannerError> {
        let req = k.request(a, k.view(a), None);
        let q = k.issue(a, QueryPurpose::Draft, PlannerSlot::Drafter, &req)?;
        self.agents[a].pending_draft = Some(req);
        k.block(a, q, BlockCause::Stall(StallCause::Draft));
        Ok(())
    }
}

impl Strategy for Speculative {
    fn name(&self) -> &'static str {
        "speculative"
    }

    fn decide(&mut self, k: &mut Kernel, a: usize) -> Result<(), PlannerError> {
        match self.agents[a].phase {
            Phase::Drafting if self.agents[a].drafts.len() >= self.depth => self.verify(k, a),
            Phase::Drafting => self.draft(k, a),
            Phase::RollingBack { .. } => self.roll_back(k, a),
            Phase::Verifying { .. } => unreachable!("verifying agents are blocked"),
        }
    }

    fn deliver(&mut self, k: &mut Kernel, d: Delivery) -> Result<(), PlannerError> {
        let a = d.agent;
        match d.purpose {
            QueryPurpose::Draft => {
                let Some(req) = self.agents[a].pending_draft.take() else { return Ok(()) };
                k.unblock(a);
                let (serial, _) = k.start_plan(a, d.response.plan);
                let act = k.slots[a].active.as_ref().expect("started");
                debug_assert_eq!(act.serial, serial);
                let undo = UndoRecord { plan: act.inst.plan(), start_pos: act.start_pos, grasp_pos: Some(act.inst.end_pos()) };
                self.agents[a].drafts.push(Draft { req, serial, undo });
            }
            QueryPurpose::Verify => {
                let Phase::Verifying { queries, answers } = &mut self.agents[a].phase else { return Ok(()) };
                if let Some(i) = queries.iter().position(|&q| q == d.query) {
                    answers[i] = Some(d.response.plan);
                }
                if answers.iter().all(Option::is_some) {
                    let answers = answers.iter().map(|x| x.expect("all present")).collect();
                    self.finish_verify(k, a, answers);
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn plan_closed(&mut self, k: &mut Kernel, a: usize, closed: &Closed) {
        if let Some((owner, draft)) = self.rollbacks.remove(&closed.active.serial) {
            debug_assert_eq!(owner, a);
            k.emit(Some(a), Event::RollbackEnd { serial: draft });
        }
    }
}
