// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

use crate::env::compile;
use crate::planner::PlannerError;
use crate::sim::{BlockCause, Delivery, Kernel, PlannerSlot, Strategy};
use crate::trace::{Event, QueryPurpose, StallCause};

/// Plan, wait for the answer, act, repeat.
#[derive(Debug, Default)]
pub struct Synchronous;

fn ask(k: &mut Kernel, agent: usize, purpose: QueryPurpose, cause: StallCause) -> Result<(), PlannerError> {
    let req = k.request(agent, k.view(agent), None);
    let q = k.issue(agent, purpose, PlannerSlot::Oracle, &req)?;
    k.block(agent, q, BlockCause::Stall(cause));
    Ok(())
}

impl Strategy for Synchronous {
    fn name(&self) -> &'static str {
        "sync"
    }

    fn decide(&mut self, k: &mut Kernel, agent: usize) -> Result<(), PlannerError> {
        ask(k, agent, QueryPurpose::Blocking, StallCause::Blocking)
    }

    fn deliver(&mut self, k: &mut Kernel, d: Delivery) -> Result<(), PlannerError> {
        let a = d.agent;
        k.unblock(a);
        let view = k.view(a);
        match compile(d.response.plan, &view) {
            Ok(inst) => {
                k.start_with(a, inst, &view);
                Ok(())
            }
            Err(_) => {
                k.emit(Some(a), Event::Replan { plan: d.response.plan });
                ask(k, a, QueryPurpose::Replan, StallCause::Replan)
            }
        }
    }
}
