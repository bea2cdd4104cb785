// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Planning the next step while the current one executes.

use crate::env::compile;
use crate::env::compile::predict_after;
use crate::plan::{PlanId, PlanKind};
use crate::planner::PlannerError;
use crate::sim::{BlockCause, Delivery, Kernel, PlannerSlot, Strategy};
use crate::trace::{Event, QueryPurpose, StallCause};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lookahead {
    None,
    InFlight(u64),
    Ready(PlanId),
}

/// Whether an early answer `next` may cut the running `current` short.
/// Transport interrupts anything but itself; a grasp interrupts exploration.
pub fn preempts(current: PlanKind, next: PlanKind) -> bool {
    match next {
        PlanKind::Transport => current != PlanKind::Transport,
        PlanKind::GoGrasp => current == PlanKind::Explore,
        _ => false,
    }
}

pub struct Parallel {
    ahead: Vec<Lookahead>,
}

impl Parallel {
    pub fn new(agents: usize) -> Self {
        Parallel { ahead: vec![Lookahead::None; agents] }
    }

    /// Asks for the plan after the running one, as seen from its predicted end state.
    fn look_ahead(&mut self, k: &mut Kernel, a: usize) -> Result<(), PlannerError> {
        let act = k.slots[a].active.as_ref().expect("running plan");
        let predicted = predict_after(&k.view(a), &act.inst);
        let req = k.request(a, predicted, None);
        let q = k.issue(a, QueryPurpose::Lookahead, PlannerSlot::Oracle, &req)?;
        self.ahead[a] = Lookahead::InFlight(q);
        Ok(())
    }

    fn ask(&mut self, k: &mut Kernel, a: usize, purpose: QueryPurpose, cause: StallCause) -> Result<(), PlannerError> {
        let req = k.request(a, k.view(a), None);
        let q = k.issue(a, purpose, PlannerSlot::Oracle, &req)?;
        self.ahead[a] = Lookahead::InFlight(q);
        k.block(a, q, BlockCause::Stall(cause));
        Ok(())
    }

    /// Starts `plan` now, or asks again from the current state when it no longer fits.
    fn start_or_replan(&mut self, k: &mut Kernel, a: usize, plan: PlanId) -> Result<(), PlannerError> {
        let view = k.view(a);
        match compile(plan, &view) {
            Ok(inst) => {
                k.start_with(a, inst, &view);
                self.look_ahead(k, a)
            }
            Err(_) => {
                k.emit(Some(a), Event::Replan { plan });
                self.ask(k, a, QueryPurpose::Replan, StallCause::Replan)
            }
        }
    }
}

impl Strategy for Parallel {
    fn name(&self) -> &'static str {
        "parallel"
    }

    fn decide(&mut self, k: &mut Kernel, a: usize) -> Result<(), PlannerError> {
        match self.ahead[a] {
            Lookahead::Ready(plan) => {
                self.ahead[a] = Lookahead::None;
                self.start_or_replan(k, a, plan)
            }
            Lookahead::InFlight(q) => {
                k.block(a, q, BlockCause::Stall(StallCause::Lookahead));
                Ok(())
            }
            Lookahead::None => self.ask(k, a, QueryPurpose::Blocking, StallCause::Blocking),
        }
    }

    fn deliver(&mut self, k: &mut Kernel, d: Delivery) -> Result<(), PlannerError> {
        let a = d.agent;
        if self.ahead[a] != Lookahead::InFlight(d.query) {
            return Ok(());
        }
        let plan = d.response.plan;
        if k.slots[a].blocked.is_some_and(|b| b.query == d.query) {
            k.unblock(a);
            self.ahead[a] = Lookahead::None;
            return self.start_or_replan(k, a, plan);
        }
        let current = k.slots[a].active.as_ref().map(|act| act.inst.kind());
        if let Some(cur) = current.filter(|&c| preempts(c, plan.kind())) {
            debug_assert!(preempts(cur, plan.kind()));
            if let Ok(inst) = compile(plan, &k.view(a)) {
                k.preempt(a, inst);
                return self.look_ahead(k, a);
            }
        }
        self.ahead[a] = Lookahead::Ready(plan);
        Ok(())
    }
}
