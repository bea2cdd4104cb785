// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Offline analyses over traces: transition locality, cache prefill
//! extraction, and plan execution accuracy.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cache::PrefillTransition;
use crate::env::metadata::field_width;
use crate::plan::PlanKind;
use crate::state::{FieldSchema, FieldSpec, MetadataRange};
use crate::trace::{Event, Trace};

/// Row-normalized bigram frequencies. Rows without support are absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalityTable {
    pub counts: BTreeMap<PlanKind, BTreeMap<PlanKind, u64>>,
}

impl LocalityTable {
    pub fn add_sequence(&mut self, seq: &[PlanKind]) {
        for w in seq.windows(2) {
            *self.counts.entry(w[0]).or_default().entry(w[1]).or_default() += 1;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn prob(&self, from: PlanKind, to: PlanKind) -> Option<f64> {
        let row = self.counts.get(&from)?;
        let n: u64 = row.values().sum();
        Some(row.get(&to).copied().unwrap_or(0) as f64 / n as f64)
    }

    pub fn rows(&self) -> BTreeMap<PlanKind, BTreeMap<PlanKind, f64>> {
        self.counts
            .iter()
            .map(|(&from, row)| {
                let n: u64 = row.values().sum();
                (from, row.iter().map(|(&to, &c)| (to, c as f64 / n as f64)).collect())
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("from,to,count,p\n");
        for (from, row) in self.rows() {
            for (to, p) in row {
                s.push_str(&format!("{from},{to},{},{p:.6}\n", self.counts[&from][&to]));
            }
        }
        s
    }
}

/// Verb sequence of plans started by each agent, in order.
pub fn plan_sequences(trace: &Trace) -> Vec<Vec<PlanKind>> {
    (0..trace.header.agents)
        .map(|a| {
            trace
                .agent_events(a)
                .filter_map(|e| match &e.event {
                    Event::PlanStart { plan, .. } => Some(plan.kind()),
                    _ => None,
                })
                .collect()
        })
        .collect()
}

pub fn locality_table(traces: &[Trace]) -> LocalityTable {
    let mut t = LocalityTable::default();
    for tr in traces {
        for seq in plan_sequences(tr) {
            t.add_sequence(&seq);
        }
    }
    t
}

fn episode_success(trace: &Trace) -> Option<f64> {
    trace.events.iter().rev().find_map(|e| match e.event {
        Event::EpisodeEnd { success, .. } => Some(success),
        _ => None,
    })
}

/// One observed `PLAN_END -> PLAN_START` adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    pub from: PlanKind,
    pub to: PlanKind,
    pub state: Vec<u32>,
}

/// Adjacencies where a plan ended and the agent's next plan event is a start.
pub fn adjacencies(trace: &Trace) -> Vec<Adjacency> {
    let mut out = Vec::new();
    for a in 0..trace.header.agents {
        let mut ended: Option<PlanKind> = None;
        for e in trace.agent_events(a) {
            match &e.event {
                Event::PlanEnd { plan, .. } => ended = Some(plan.kind()),
                Event::PlanFailed { .. } => ended = None,
                Event::PlanStart { plan, state, .. } => {
                    if let Some(from) = ended.take() {
                        out.push(Adjacency { from, to: plan.kind(), state: state.clone() });
                    }
                }
                _ => {}
            }
        }
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum PrefillError {
    #[error("traces disagree on state fields")]
    MixedFields,
    #[error("unknown state field `{0}`")]
    UnknownField(String),
}

/// Schema of the state vectors recorded in a trace.
pub fn trace_schema(trace: &Trace) -> Result<Arc<FieldSchema>, PrefillError> {
    let specs = trace
        .header
        .fields
        .iter()
        .map(|n| {
            field_width(n)
                .map(|width| FieldSpec { name: n.clone(), width })
                .ok_or_else(|| PrefillError::UnknownField(n.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    FieldSchema::new(specs).map(Arc::new).map_err(|_| PrefillError::MixedFields)
}

/// Bigram counts with per-field min/max over the given traces, optionally
/// only from fully successful episodes.
pub fn extract_prefill(traces: &[Trace], success_only: bool) -> Result<Vec<PrefillTransition>, PrefillError> {
    if let Some(first) = traces.first() {
        if traces.iter().any(|t| t.header.fields != first.header.fields) {
            return Err(PrefillError::MixedFields);
        }
    }
    let mut acc: BTreeMap<(PlanKind, PlanKind), (u64, MetadataRange)> = BTreeMap::new();
    for t in traces {
        if success_only && episode_success(t) != Some(1.0) {
            continue;
        }
        for adj in adjacencies(t) {
            acc.entry((adj.from, adj.to))
                .and_modify(|(c, r)| {
                    *c += 1;
                    r.widen(&adj.state);
                })
                .or_insert_with(|| (1, MetadataRange::point(&adj.state)));
        }
    }
    Ok(acc.into_iter().map(|((from, to), (count, range))| PrefillTransition { from, to, count, range }).collect())
}

/// Cumulative `(correct - wrong) / frames` after each tick over all agents,
/// from the judge marks in the trace.
pub fn accuracy_series(trace: &Trace) -> Vec<f64> {
    let n = trace.header.agents as usize;
    let ticks = trace
        .events
        .iter()
        .rev()
        .find_map(|e| match e.event {
            Event::EpisodeEnd { ticks, .. } => Some(ticks),
            _ => None,
        })
        .unwrap_or(0);
    let mut marks: Vec<(u64, usize, bool)> = trace
        .events
        .iter()
        .filter_map(|e| match e.event {
            Event::Judge { correct } => e.agent.map(|a| (e.tick, a as usize, correct)),
            _ => None,
        })
        .collect();
    if marks.is_empty() {
        return Vec::new();
    }
    marks.sort_by_key(|m| m.0);
    let mut cur: Vec<Option<bool>> = vec![None; n];
    let (mut net, mut frames) = (0i64, 0u64);
    let mut it = marks.into_iter().peekable();
    let mut out = Vec::with_capacity(ticks as usize);
    for t in 0..ticks {
        while let Some(&(at, a, c)) = it.peek() {
            if at > t {
                break;
            }
            cur[a] = Some(c);
            it.next();
        }
        for c in cur.iter().flatten() {
            net += if *c { 1 } else { -1 };
            frames += 1;
        }
        out.push(if frames == 0 { 0.0 } else { net as f64 / frames as f64 });
    }
    out
}

/// A first-order chain over plan verbs, used to generate synthetic traces.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    rows: BTreeMap<PlanKind, Vec<(PlanKind, f64)>>,
}

impl MarkovChain {
    /// Each row must be non-empty with probabilities summing to 1.
    pub fn new(rows: BTreeMap<PlanKind, Vec<(PlanKind, f64)>>) -> Result<Self, String> {
        for (from, row) in &rows {
            let s: f64 = row.iter().map(|(_, p)| p).sum();
            if row.is_empty() || (s - 1.0).abs() > 1e-9 || row.iter().any(|(_, p)| *p < 0.0) {
                return Err(format!("row {from} is not a distribution"));
            }
            if let Some((to, _)) = row.iter().find(|(to, _)| !rows.contains_key(to)) {
                return Err(format!("state {to} has no outgoing row"));
            }
        }
        Ok(MarkovChain { rows })
    }

    /// Transport-task shaped chain where a grasp is followed by a put with probability `p_put`.
    pub fn transport_like(p_put: f64) -> Self {
        use PlanKind::*;
        let rest = 1.0 - p_put;
        let rows = BTreeMap::from([
            (Explore, vec![(GoGrasp, 0.6), (GoTo, 0.25), (Explore, 0.15)]),
            (GoTo, vec![(GoGrasp, 0.9), (Explore, 0.1)]),
            (GoGrasp, vec![(PutInto, p_put), (GoGrasp, rest * 0.5), (Transport, rest * 0.3), (GoTo, rest * 0.2)]),
            (PutInto, vec![(GoGrasp, 0.55), (GoTo, 0.2), (Explore, 0.15), (Transport, 0.1)]),
            (Transport, vec![(Explore, 0.5), (GoGrasp, 0.3), (GoTo, 0.15), (Wait, 0.05)]),
            (Wait, vec![(Explore, 1.0)]),
        ]);
        MarkovChain::new(rows).expect("rows are distributions")
    }

    pub fn sample(&self, start: PlanKind, transitions: usize, rng: &mut impl Rng) -> Vec<PlanKind> {
        let mut seq = Vec::with_capacity(transitions + 1);
        let mut cur = start;
        seq.push(cur);
        for _ in 0..transitions {
            let row = &self.rows[&cur];
            let mut u: f64 = rng.gen();
            cur = row.last().expect("non-empty row").0;
            for &(to, p) in row {
                if u < p {
                    cur = to;
                    break;
                }
                u -= p;
            }
            seq.push(cur);
        }
        seq
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use PlanKind::*;

    #[test]
    fn alternating_pair() {
        let mut t = LocalityTable::default();
        t.add_sequence(&[Explore, GoGrasp, Explore, GoGrasp]);
        assert_eq!(t.prob(Explore, GoGrasp), Some(1.0));
        assert_eq!(t.prob(GoGrasp, Explore), Some(1.0));
        let mut single = LocalityTable::default();
        single.add_sequence(&[Wait]);
        assert!(single.is_empty());
    }

    #[test]
    fn synthetic_chain_recovers_parameter() {
        let chain = MarkovChain::transport_like(0.597);
        let seq = chain.sample(Explore, 20_000, &mut ChaCha8Rng::seed_from_u64(3));
        let mut t = LocalityTable::default();
        t.add_sequence(&seq);
        assert!((t.prob(GoGrasp, PutInto).unwrap() - 0.597).abs() < 0.02);
    }
}
