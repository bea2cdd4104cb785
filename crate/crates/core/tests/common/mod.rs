// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use plancache::env::Scenario;
use plancache::trace::{Event, Trace};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::load(scenario_path(name)).expect("shipped scenario loads")
}

/// Periodic or miss queries issued while a confirmation or correction hold
/// is active, found by scanning the trace: a hold opens at the RESOLVED
/// event naming it and closes at the end or failure of the held plan.
pub fn queries_inside_holds(t: &Trace) -> Vec<(u64, u32)> {
    let mut open: HashMap<u32, u64> = HashMap::new();
    let mut bad = Vec::new();
    for e in &t.events {
        let Some(a) = e.agent else { continue };
        match &e.event {
            Event::Resolved { hold: Some(s), .. } => {
                open.insert(a, *s);
            }
            Event::PlanEnd { serial, .. } | Event::PlanFailed { serial, .. } => {
                if open.get(&a) == Some(serial) {
                    open.remove(&a);
                }
            }
            Event::QueryIssued { .. } if open.contains_key(&a) => bad.push((e.tick, a)),
            _ => {}
        }
    }
    bad
}

/// Structural checks every trace must pass.
pub fn check_trace_shape(t: &Trace) {
    let mut last = 0;
    let mut open: HashMap<u64, u32> = HashMap::new();
    for e in &t.events {
        assert!(e.tick >= last, "tick went backwards at {e:?}");
        last = e.tick;
        match &e.event {
            Event::PlanStart { serial, .. } => {
                assert!(open.insert(*serial, e.agent.unwrap()).is_none(), "serial {serial} started twice");
            }
            Event::PlanEnd { serial, .. } | Event::PlanFailed { serial, .. } => {
                assert!(open.remove(serial).is_some(), "serial {serial} closed without a start");
            }
            _ => {}
        }
    }
    // Whatever is still open was running when the budget ran out: at most one per agent.
    let mut per_agent: HashMap<u32, usize> = HashMap::new();
    for a in open.values() {
        *per_agent.entry(*a).or_default() += 1;
    }
    assert!(per_agent.values().all(|&n| n <= 1), "more than one open plan per agent");
    assert!(matches!(t.events.last().map(|e| &e.event), Some(Event::EpisodeEnd { .. })));
}

use num_rational::Ratio;
use plancache::plan::PlanKind;

/// Linear-scan model of the plan cache, written against the documented
/// rules rather than the implementation.
#[derive(Debug, Default, Clone)]
pub struct BruteCache {
    pub entries: Vec<BruteEntry>,
    pub cand: HashMap<PlanKind, u64>,
    pub conf: HashMap<PlanKind, u64>,
}

#[derive(Debug, Clone)]
pub struct BruteEntry {
    pub from: PlanKind,
    pub to: PlanKind,
    pub lo: Vec<u32>,
    pub hi: Vec<u32>,
    pub count: u64,
}

impl BruteCache {
    pub fn reinforce(&mut self, from: PlanKind, to: PlanKind, v: &[u32]) {
        match self.entries.iter_mut().find(|e| e.from == from && e.to == to) {
            Some(e) => {
                e.count += 1;
                for ((lo, hi), &x) in e.lo.iter_mut().zip(e.hi.iter_mut()).zip(v) {
                    *lo = (*lo).min(x);
                    *hi = (*hi).max(x);
                }
            }
            None => self.entries.push(BruteEntry { from, to, lo: v.to_vec(), hi: v.to_vec(), count: 1 }),
        }
        *self.conf.entry(to).or_default() += 1;
    }

    pub fn penalize(&mut self, from: PlanKind, to: PlanKind) {
        if let Some(e) = self.entries.iter_mut().find(|e| e.from == from && e.to == to) {
            e.count = e.count.saturating_sub(1);
            let c = self.conf.entry(to).or_default();
            *c = c.saturating_sub(1);
        }
    }

    pub fn importance(&self, p: PlanKind) -> Ratio<u64> {
        let cand = self.cand.get(&p).copied().unwrap_or(0);
        let conf = self.conf.get(&p).copied().unwrap_or(0);
        Ratio::new((conf + 1).min(cand + 1), cand + 1)
    }

    /// Feasible entries in storage order.
    pub fn feasible(&self, prev: PlanKind, v: &[u32]) -> Vec<&BruteEntry> {
        self.entries
            .iter()
            .filter(|e| e.from == prev && (0..v.len()).all(|i| e.lo[i] <= v[i] && v[i] <= e.hi[i]))
            .collect()
    }

    pub fn select(&mut self, prev: PlanKind, v: &[u32]) -> Option<(PlanKind, Ratio<u64>)> {
        let scored: Vec<(PlanKind, u64, Ratio<u64>)> = self
            .feasible(prev, v)
            .into_iter()
            .map(|e| (e.to, e.count, self.importance(e.to) * e.count))
            .collect();
        for (to, _, _) in &scored {
            *self.cand.entry(*to).or_default() += 1;
        }
        let mut best: Option<(PlanKind, u64, Ratio<u64>)> = None;
        for (to, count, score) in scored {
            if score == Ratio::from_integer(0) {
                continue;
            }
            let better = match &best {
                None => true,
                Some((bt, bc, bs)) => {
                    score > *bs || (score == *bs && (count > *bc || (count == *bc && to.name() < bt.name())))
                }
            };
            if better {
                best = Some((to, count, score));
            }
        }
        best.map(|(to, _, s)| (to, s))
    }
}

use plancache::analysis::{extract_prefill, trace_schema};
use plancache::cache::PlanCache;
use plancache::strategies::{run_episodes, StrategyConfig, StrategyKind};

/// Cache prefilled from successful synchronous runs on `seeds`.
pub fn warm_cache(s: &Scenario, seeds: &[u64], latency: u32) -> PlanCache {
    let cfg = StrategyConfig {
        kind: StrategyKind::Sync,
        latency: plancache::planner::LatencyDist::Const(latency),
        judge: false,
        ..Default::default()
    };
    let traces = run_episodes(s, seeds, &cfg).expect("sync runs");
    let mut cache = PlanCache::new(trace_schema(&traces[0]).expect("schema"));
    cache.prefill(extract_prefill(&traces, true).expect("prefill")).expect("prefill fits");
    cache
}

pub fn cfg(kind: StrategyKind, latency: u32) -> StrategyConfig {
    StrategyConfig { kind, latency: plancache::planner::LatencyDist::Const(latency), ..Default::default() }
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}
