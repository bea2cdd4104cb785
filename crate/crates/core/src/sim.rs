// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Deterministic episode kernel shared by all strategies.
//!
//! Each tick: strategies decide for idle agents and receive due planner
//! answers until nothing changes, then every agent contributes one primitive,
//! the world steps, and finished or failed plans are closed.

use std::collections::VecDeque;

use crate::env::{
    compile, reference_plan, AgentView, MetadataExtractor, Ongoing, PlanInstance, Pos, Primitive, Scenario, ScenarioError,
    World,
};
use crate::plan::{PlanId, PlanKind};
use crate::planner::{CostModel, Planner, PlannerError, PlannerRequest, PlannerResponse};
use crate::state::StateVector;
use crate::trace::{Event, QueryPurpose, StallCause, Trace, TraceEvent, TraceHeader, TRACE_SCHEMA};

const HISTORY: usize = 8;
/// Settle rounds per tick before idle agents are parked on Wait.
const MAX_ROUNDS: usize = 64;

#[derive(Debug, Clone)]
pub struct Active {
    pub inst: PlanInstance,
    pub serial: u64,
    /// Cache-key predecessor of this plan.
    pub prev: PlanKind,
    pub state: StateVector,
    pub started: u64,
    pub start_pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockCause {
    Miss,
    Stall(StallCause),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Blocked {
    pub query: u64,
    pub since: u64,
    pub cause: BlockCause,
}

#[derive(Debug, Clone)]
pub struct AgentSlot {
    pub active: Option<Active>,
    pub blocked: Option<Blocked>,
    /// Verb of the last completed plan; starts as Wait.
    pub prev: PlanKind,
    pub history: VecDeque<PlanId>,
    pub dead: bool,
    judged: Option<bool>,
}

impl AgentSlot {
    fn new() -> Self {
        AgentSlot { active: None, blocked: None, prev: PlanKind::Wait, history: VecDeque::new(), dead: false, judged: None }
    }

    pub fn is_idle(&self) -> bool {
        !self.dead && self.active.is_none() && self.blocked.is_none()
    }
}

/// A planner answer reaching its agent.
#[derive(Debug, Clone)]
pub struct Delivery {
    pub query: u64,
    pub agent: usize,
    pub purpose: QueryPurpose,
    pub issued: u64,
    pub response: PlannerResponse,
}

/// A plan that stopped running, reported to the strategy after the step.
#[derive(Debug, Clone)]
pub struct Closed {
    pub active: Active,
    pub failed: bool,
}

#[derive(Debug, Clone, Copy)]
pub enum PlannerSlot {
    Oracle,
    Drafter,
}

pub trait Strategy {
    fn name(&self) -> &'static str;

    /// Called for an agent with no plan and no pending blocking query. Must
    /// leave the agent running a plan or blocked.
    fn decide(&mut self, k: &mut Kernel, agent: usize) -> Result<(), PlannerError>;

    fn deliver(&mut self, k: &mut Kernel, d: Delivery) -> Result<(), PlannerError>;

    /// Runs once per tick and live agent after settling, before primitives are collected.
    fn before_step(&mut self, _k: &mut Kernel, _agent: usize) -> Result<(), PlannerError> {
        Ok(())
    }

    fn plan_closed(&mut self, _k: &mut Kernel, _agent: usize, _closed: &Closed) {}

    /// Total stored cache entries, for strategies that keep a cache.
    fn cache_entries(&self) -> Option<u32> {
        None
    }
}

pub struct Kernel {
    pub world: World,
    pub slots: Vec<AgentSlot>,
    pub extractor: MetadataExtractor,
    header: TraceHeader,
    events: Vec<TraceEvent>,
    oracle: Box<dyn Planner>,
    drafter: Option<Box<dyn Planner>>,
    pending: Vec<(u64, Delivery)>,
    next_query: u64,
    next_serial: u64,
    judge: bool,
    last_cache_size: Option<u32>,
}

impl Kernel {
    pub fn new(
        scenario: &Scenario,
        seed: u64,
        strategy: &str,
        oracle: Box<dyn Planner>,
        drafter: Option<Box<dyn Planner>>,
        cost: CostModel,
        judge: bool,
    ) -> Result<Self, ScenarioError> {
        let world = World::new(scenario, seed)?;
        let extractor = MetadataExtractor::for_scenario(scenario)?;
        let n = world.agents().len();
        let header = TraceHeader {
            schema: TRACE_SCHEMA.into(),
            scenario: scenario.name.clone(),
            strategy: strategy.into(),
            seed,
            agents: n as u32,
            budget: scenario.budget,
            fields: scenario.state_fields.clone(),
            price_in: cost.price_in,
            price_out: cost.price_out,
        };
        Ok(Kernel {
            world,
            slots: (0..n).map(|_| AgentSlot::new()).collect(),
            extractor,
            header,
            events: Vec::new(),
            oracle,
            drafter,
            pending: Vec::new(),
            next_query: 1,
            next_serial: 1,
            judge,
            last_cache_size: None,
        })
    }

    pub fn now(&self) -> u64 {
        self.world.tick()
    }

    pub fn n_agents(&self) -> usize {
        self.slots.len()
    }

    pub fn view(&self, agent: usize) -> AgentView {
        self.world.view(agent)
    }

    pub fn state_of(&self, view: &AgentView) -> StateVector {
        self.extractor.extract(view)
    }

    pub fn emit(&mut self, agent: Option<usize>, event: Event) {
        let tick = self.now();
        self.events.push(TraceEvent { tick, agent: agent.map(|a| a as u32), event });
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    /// Request built from `view`, optionally describing the running plan.
    pub fn request(&self, agent: usize, view: AgentView, ongoing: Option<Ongoing>) -> PlannerRequest {
        let state = self.extractor.extract(&view);
        let history = self.slots[agent].history.iter().copied().collect();
        PlannerRequest::new(view, state, history, ongoing)
    }

    /// Sends `req` and schedules the answer. The answer is computed from the
    /// request snapshot now and handed over once its latency has elapsed.
    pub fn issue(
        &mut self,
        agent: usize,
        purpose: QueryPurpose,
        slot: PlannerSlot,
        req: &PlannerRequest,
    ) -> Result<u64, PlannerError> {
        let planner = match slot {
            PlannerSlot::Oracle => &mut self.oracle,
            PlannerSlot::Drafter => self.drafter.as_mut().expect("strategy configured a drafter"),
        };
        let response = planner.plan(req)?;
        let query = self.next_query;
        self.next_query += 1;
        let now = self.now();
        let due = now + response.latency_ticks as u64;
        self.emit(
            Some(agent),
            Event::QueryIssued {
                query,
                purpose,
                tokens_in: response.tokens_in,
                tokens_out: response.tokens_out,
                due,
            },
        );
        self.pending.push((due, Delivery { query, agent, purpose, issued: now, response }));
        Ok(query)
    }

    fn take_due(&mut self) -> Vec<Delivery> {
        let now = self.now();
        let mut due: Vec<(u64, Delivery)> = Vec::new();
        let mut i = 0;
        while i < self.pending.len() {
            if self.pending[i].0 <= now {
                due.push(self.pending.remove(i));
            } else {
                i += 1;
            }
        }
        due.sort_by_key(|(t, d)| (*t, d.query));
        due.into_iter()
            .map(|(_, d)| {
                self.emit(Some(d.agent), Event::OracleResponse { query: d.query, plan: d.response.plan });
                d
            })
            .collect()
    }

    pub fn block(&mut self, agent: usize, query: u64, cause: BlockCause) {
        let since = self.now();
        self.slots[agent].blocked = Some(Blocked { query, since, cause });
    }

    /// Ends a blocking wait and records its stall.
    pub fn unblock(&mut self, agent: usize) -> Option<Blocked> {
        let b = self.slots[agent].blocked.take()?;
        let ticks = self.now() - b.since;
        let ev = match b.cause {
            BlockCause::Miss => Event::MissFallback { stall: ticks },
            BlockCause::Stall(cause) => Event::Stall { cause, ticks },
        };
        self.emit(Some(agent), ev);
        Some(b)
    }

    /// Starts `inst` as the agent's running plan and returns its serial.
    pub fn start(&mut self, agent: usize, inst: PlanInstance) -> u64 {
        let view = self.view(agent);
        self.start_with(agent, inst, &view)
    }

    pub fn start_with(&mut self, agent: usize, inst: PlanInstance, view: &AgentView) -> u64 {
        debug_assert!(self.slots[agent].active.is_none());
        let serial = self.next_serial;
        self.next_serial += 1;
        let state = self.extractor.extract(view);
        let prev = self.slots[agent].prev;
        self.emit(
            Some(agent),
            Event::PlanStart { plan: inst.plan(), serial, prev, state: state.values().to_vec(), ticks: inst.total() },
        );
        let slot = &mut self.slots[agent];
        if slot.history.len() == HISTORY {
            slot.history.pop_front();
        }
        slot.history.push_back(inst.plan());
        slot.active = Some(Active { inst, serial, prev, state, started: self.world.tick(), start_pos: view.pos });
        serial
    }

    /// Compiles and starts `plan`; falls back to Wait when it does not compile.
    pub fn start_plan(&mut self, agent: usize, plan: PlanId) -> (u64, bool) {
        let view = self.view(agent);
        match compile(plan, &view) {
            Ok(inst) => (self.start_with(agent, inst, &view), true),
            Err(_) => {
                let inst = compile(PlanId::wait(), &view).expect("wait always compiles");
                (self.start_with(agent, inst, &view), false)
            }
        }
    }

    /// Stops the running plan in favor of `inst`.
    pub fn preempt(&mut self, agent: usize, inst: PlanInstance) -> (Active, u64) {
        let old = self.slots[agent].active.take().expect("preempting a running plan");
        self.emit(
            Some(agent),
            Event::Preempt { old: old.inst.plan(), old_serial: old.serial, new: inst.plan() },
        );
        self.emit(Some(agent), Event::PlanFailed { plan: old.inst.plan(), serial: old.serial });
        let serial = self.start(agent, inst);
        (old, serial)
    }

    pub fn next_serial(&self) -> u64 {
        self.next_serial
    }

    /// Withdraws a query that has not been answered yet. The answer is never delivered.
    pub fn cancel(&mut self, agent: usize, query: u64) -> bool {
        let before = self.pending.len();
        self.pending.retain(|(_, d)| d.query != query);
        let hit = self.pending.len() != before;
        if hit {
            self.emit(Some(agent), Event::QueryCancelled { query });
        }
        hit
    }

    fn kill(&mut self, agent: usize, e: PlannerError) {
        self.emit(Some(agent), Event::AgentFailed { message: e.to_string() });
        let slot = &mut self.slots[agent];
        slot.dead = true;
        slot.active = None;
        slot.blocked = None;
        self.pending.retain(|(_, d)| d.agent != agent);
    }

    fn settle(&mut self, s: &mut dyn Strategy) {
        for _ in 0..MAX_ROUNDS {
            let mut progressed = false;
            for a in 0..self.slots.len() {
                if self.slots[a].is_idle() {
                    progressed = true;
                    if let Err(e) = s.decide(self, a) {
                        self.kill(a, e);
                    } else if self.slots[a].is_idle() {
                        self.start_plan(a, PlanId::wait());
                    }
                }
            }
            let due = self.take_due();
            for d in due {
                progressed = true;
                let a = d.agent;
                if self.slots[a].dead {
                    continue;
                }
                if let Err(e) = s.deliver(self, d) {
                    self.kill(a, e);
                }
            }
            if !progressed {
                return;
            }
        }
        for a in 0..self.slots.len() {
            if self.slots[a].is_idle() {
                self.start_plan(a, PlanId::wait());
            }
        }
    }

    fn judge_tick(&mut self) {
        for a in 0..self.slots.len() {
            if self.slots[a].dead {
                continue;
            }
            let view = self.view(a);
            let (running, ongoing) = match &self.slots[a].active {
                Some(act) => (
                    act.inst.plan(),
                    Some(Ongoing { plan: act.inst.plan(), remaining: act.inst.remaining() }),
                ),
                None => (PlanId::wait(), None),
            };
            let correct = reference_plan(&view, ongoing.as_ref()) == running;
            if self.slots[a].judged != Some(correct) {
                self.slots[a].judged = Some(correct);
                self.emit(Some(a), Event::Judge { correct });
            }
        }
    }

    fn step(&mut self, s: &mut dyn Strategy) {
        let actions: Vec<Primitive> = self
            .slots
            .iter_mut()
            .map(|slot| match slot.active.as_mut() {
                Some(act) => act.inst.next_primitive().unwrap_or(Primitive::Wait),
                None => Primitive::Wait,
            })
            .collect();
        let out = self.world.step(&actions);
        debug_assert_eq!(self.world.check_invariants(), Ok(()));
        // Events of this step carry the tick the primitives ran in.
        let tick = self.world.tick() - 1;
        for p in &out.perturbations {
            self.events.push(TraceEvent {
                tick,
                agent: None,
                event: Event::EnvPerturb { object: p.object, from: p.from, to: p.to },
            });
        }
        // All closures are logged before any strategy reacts, so the reactions
        // (stamped with the next tick) never precede another agent's closure.
        let mut closed = Vec::new();
        for a in 0..self.slots.len() {
            let Some(act) = self.slots[a].active.as_ref() else { continue };
            let view = self.world.view(a);
            let failed = out.failed[a] || !act.inst.still_valid(&view);
            if !failed && !act.inst.is_done() {
                continue;
            }
            let act = self.slots[a].active.take().expect("checked");
            let ev = if failed {
                Event::PlanFailed { plan: act.inst.plan(), serial: act.serial }
            } else {
                self.slots[a].prev = act.inst.kind();
                Event::PlanEnd { plan: act.inst.plan(), serial: act.serial }
            };
            self.events.push(TraceEvent { tick, agent: Some(a as u32), event: ev });
            closed.push((a, Closed { active: act, failed }));
        }
        for (a, c) in closed {
            s.plan_closed(self, a, &c);
        }
    }

    fn note_cache_size(&mut self, s: &dyn Strategy) {
        if let Some(n) = s.cache_entries() {
            if self.last_cache_size != Some(n) {
                self.last_cache_size = Some(n);
                self.emit(None, Event::CacheSize { entries: n });
            }
        }
    }

    /// Runs the episode to completion or budget expiry.
    pub fn run(mut self, s: &mut dyn Strategy) -> Trace {
        self.note_cache_size(s);
        while !self.world.is_over() {
            self.settle(s);
            for a in 0..self.slots.len() {
                if !self.slots[a].dead {
                    if let Err(e) = s.before_step(&mut self, a) {
                        self.kill(a, e);
                    }
                }
            }
            if self.judge {
                self.judge_tick();
            }
            self.step(s);
            self.note_cache_size(s);
        }
        for a in 0..self.slots.len() {
            self.unblock(a);
        }
        let (delivered, total) = (self.world.delivered(), self.world.total_targets());
        let ticks = self.world.tick();
        let success = self.world.success();
        self.emit(None, Event::EpisodeEnd { delivered, total, ticks, success });
        Trace { header: self.header, events: self.events }
    }
}
