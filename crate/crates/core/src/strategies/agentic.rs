// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Cache-first execution with asynchronous validation.
//!
//! Each agent looks up the next verb in its own cache and binds the argument
//! locally. A miss blocks on the oracle. While plans run, a background query
//! goes out every few ticks and its answer either confirms what the cache
//! did or corrects it, optionally replacing the running plan.

use crate::cache::{PlanCache, Selection};
use crate::env::{compile, resolve, Ongoing};
use crate::planner::PlannerError;
use crate::sim::{BlockCause, Closed, Delivery, Kernel, PlannerSlot, Strategy};
use crate::trace::{Event, HoldKind, QueryPurpose, Resolution};
use crate::updater::{IssueDecision, ResolutionOutcome, Updater, UpdaterConfig};

const SCHEMA: &str = "cache schema is checked against the scenario before the run";

pub struct AgenticCache {
    caches: Vec<PlanCache>,
    updaters: Vec<Updater>,
    cfg: UpdaterConfig,
}

impl AgenticCache {
    pub fn new(agents: usize, cache: PlanCache, cfg: UpdaterConfig) -> Self {
        AgenticCache { caches: vec![cache; agents], updaters: (0..agents).map(|_| Updater::new(cfg)).collect(), cfg }
    }

    pub fn cache(&self, agent: usize) -> &PlanCache {
        &self.caches[agent]
    }

    pub fn stale_count(&self) -> u64 {
        self.updaters.iter().map(Updater::stale_count).sum()
    }

    fn miss(&mut self, k: &mut Kernel, a: usize) -> Result<(), PlannerError> {
        let view = k.view(a);
        let ctx = k.state_of(&view);
        let req = k.request(a, view, None);
        if let Some(old) = self.updaters[a].outstanding().map(|q| q.query_id) {
            self.updaters[a].abandon();
            k.cancel(a, old);
        }
        let q = k.issue(a, QueryPurpose::Miss, PlannerSlot::Oracle, &req)?;
        self.updaters[a].record_miss(q, k.now(), ctx);
        k.block(a, q, BlockCause::Miss);
        Ok(())
    }

    fn deliver_miss(&mut self, k: &mut Kernel, d: &Delivery) {
        let a = d.agent;
        let plan = d.response.plan;
        k.unblock(a);
        let pred = k.slots[a].prev;
        let q = self.updaters[a].outstanding().cloned();
        if self.cfg.updates {
            if let Some(q) = &q {
                self.caches[a].reinforce(pred, plan.kind(), &q.context).expect(SCHEMA);
            }
        }
        let view = k.view(a);
        let mut hold = None;
        if let Ok(inst) = compile(plan, &view) {
            let serial = k.start_with(a, inst, &view);
            if !self.cfg.is_static() {
                self.updaters[a].set_hold(HoldKind::Confirmation, serial);
                hold = Some(serial);
            }
        }
        let _ = self.updaters[a].take(d.query);
        k.emit(
            Some(a),
            Event::Resolved {
                query: d.query,
                outcome: Resolution::MissInsert,
                plan,
                hold,
                hold_kind: hold.map(|_| HoldKind::Confirmation),
            },
        );
    }

    fn deliver_periodic(&mut self, k: &mut Kernel, d: &Delivery) {
        let a = d.agent;
        let plan = d.response.plan;
        let q = match self.updaters[a].take(d.query) {
            Ok(q) => q,
            Err(_) => {
                k.emit(
                    Some(a),
                    Event::Resolved { query: d.query, outcome: Resolution::Stale, plan, hold: None, hold_kind: None },
                );
                return;
            }
        };
        let running = k.slots[a].active.as_ref().map(|act| (act.serial, act.inst.plan(), act.prev, act.state.clone()));
        let out = self.updaters[a]
            .resolve(&q, plan, running.as_ref().map(|(s, p, pr, st)| (*s, *p, *pr, st)), &mut self.caches[a])
            .expect(SCHEMA);
        let (outcome, hold) = match out {
            ResolutionOutcome::Confirmed { .. } => {
                let hold = running.map(|(s, ..)| s);
                if let Some(s) = hold {
                    self.updaters[a].set_hold(HoldKind::Confirmation, s);
                }
                (Resolution::Confirmed, hold.map(|s| (s, HoldKind::Confirmation)))
            }
            ResolutionOutcome::Corrected { .. } => {
                let mut hold = None;
                if self.cfg.replacement && k.slots[a].active.is_some() {
                    let view = k.view(a);
                    if let Ok(inst) = compile(plan, &view) {
                        let (_, serial) = k.preempt(a, inst);
                        let act = k.slots[a].active.as_ref().expect("just started");
                        self.updaters[a].on_plan_start(serial, plan, act.prev, &act.state);
                        self.updaters[a].set_hold(HoldKind::Correction, serial);
                        hold = Some((serial, HoldKind::Correction));
                    }
                }
                (Resolution::Corrected, hold)
            }
            ResolutionOutcome::MissInsert => unreachable!("periodic query"),
        };
        k.emit(
            Some(a),
            Event::Resolved {
                query: d.query,
                outcome,
                plan,
                hold: hold.map(|(s, _)| s),
                hold_kind: hold.map(|(_, h)| h),
            },
        );
    }
}

impl Strategy for AgenticCache {
    fn name(&self) -> &'static str {
        "agenticcache"
    }

    fn decide(&mut self, k: &mut Kernel, a: usize) -> Result<(), PlannerError> {
        let view = k.view(a);
        let state = k.state_of(&view);
        let prev = k.slots[a].prev;
        let (sel, candidates) = self.caches[a].query(prev, &state).expect(SCHEMA);
        if let Selection::Hit { plan: kind, score } = sel {
            let inst = resolve(kind, &view).and_then(|p| compile(p, &view).ok());
            if let Some(inst) = inst {
                k.emit(
                    Some(a),
                    Event::CacheQuery {
                        prev,
                        hit: true,
                        plan: Some(kind),
                        score: Some((score.numer(), score.denom())),
                        candidates: candidates as u32,
                    },
                );
                let plan = inst.plan();
                let serial = k.start_with(a, inst, &view);
                self.updaters[a].on_plan_start(serial, plan, prev, &state);
                return Ok(());
            }
        }
        k.emit(Some(a), Event::CacheQuery { prev, hit: false, plan: None, score: None, candidates: candidates as u32 });
        self.miss(k, a)
    }

    fn deliver(&mut self, k: &mut Kernel, d: Delivery) -> Result<(), PlannerError> {
        match d.purpose {
            QueryPurpose::Miss => {
                let current = k.slots[d.agent].blocked.is_some_and(|b| b.query == d.query);
                if current {
                    self.deliver_miss(k, &d);
                } else {
                    let _ = self.updaters[d.agent].take(d.query);
                }
            }
            _ => self.deliver_periodic(k, &d),
        }
        Ok(())
    }

    fn before_step(&mut self, k: &mut Kernel, a: usize) -> Result<(), PlannerError> {
        let Some(act) = k.slots[a].active.as_ref() else { return Ok(()) };
        let (serial, plan, pred, remaining) = (act.serial, act.inst.plan(), act.prev, act.inst.remaining());
        match self.updaters[a].poll(k.now()) {
            IssueDecision::Issue => {
                let view = k.view(a);
                let ctx = k.state_of(&view);
                let req = k.request(a, view, Some(Ongoing { plan, remaining }));
                let q = k.issue(a, QueryPurpose::Periodic, PlannerSlot::Oracle, &req)?;
                self.updaters[a].record_issue(q, k.now(), ctx, serial, plan, pred);
            }
            IssueDecision::Suppressed(reason) => k.emit(Some(a), Event::QuerySuppressed { reason }),
            IssueDecision::Wait => {}
        }
        Ok(())
    }

    fn plan_closed(&mut self, k: &mut Kernel, a: usize, closed: &Closed) {
        if self.updaters[a].on_plan_closed(closed.active.serial, k.now()) {
            k.emit(Some(a), Event::HoldReleased { serial: closed.active.serial });
        }
    }

    fn cache_entries(&self) -> Option<u32> {
        Some(self.caches.iter().map(|c| c.len() as u32).sum())
    }
}
