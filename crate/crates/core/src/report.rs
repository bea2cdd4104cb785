// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Episode metrics, computed from a trace alone so that a stored trace
//! reproduces its report exactly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::planner::CostModel;
use crate::trace::{Event, Resolution, Trace};

pub const REPORT_SCHEMA: &str = "plancache-report v1";

/// Ticks at which the stored-entry count is sampled.
pub const GROWTH_CHECKPOINTS: [u64; 9] = [0, 500, 1000, 1500, 2000, 3000, 4000, 5000, 6000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub scenario: String,
    pub strategy: String,
    pub seed: u64,
    pub success: f64,
    pub delivered: u32,
    pub total: u32,
    pub ticks: u64,
    pub stall_ticks: u64,
    pub oracle_queries: u64,
    pub draft_queries: u64,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub cost: f64,
    pub cache_queries: u64,
    pub hits: u64,
    pub misses: u64,
    pub fallback_latencies: Vec<u64>,
    pub confirmed: u64,
    pub corrected: u64,
    pub stale: u64,
    pub suppressed: u64,
    pub preempts: u64,
    pub replans: u64,
    pub plans: u64,
    pub plan_failures: u64,
    pub perturbations: u64,
    /// Entries drafted minus accepted, per verification window.
    pub rollback_depths: Vec<u32>,
    pub rollback_spans: u64,
    /// `(correct - wrong) / frames` after each tick, over all agents.
    pub accuracy: Vec<f64>,
    /// Total stored entries at each of [`GROWTH_CHECKPOINTS`].
    pub cache_growth: Vec<(u64, u32)>,
}

impl EpisodeReport {
    pub fn from_trace(trace: &Trace) -> EpisodeReport {
        let h = &trace.header;
        let cost_model = CostModel { price_in: h.price_in, price_out: h.price_out };
        let mut r = EpisodeReport {
            scenario: h.scenario.clone(),
            strategy: h.strategy.clone(),
            seed: h.seed,
            success: 0.0,
            delivered: 0,
            total: 0,
            ticks: 0,
            stall_ticks: 0,
            oracle_queries: 0,
            draft_queries: 0,
            tokens_in: 0,
            tokens_out: 0,
            cost: 0.0,
            cache_queries: 0,
            hits: 0,
            misses: 0,
            fallback_latencies: Vec::new(),
            confirmed: 0,
            corrected: 0,
            stale: 0,
            suppressed: 0,
            preempts: 0,
            replans: 0,
            plans: 0,
            plan_failures: 0,
            perturbations: 0,
            rollback_depths: Vec::new(),
            rollback_spans: 0,
            accuracy: Vec::new(),
            cache_growth: Vec::new(),
        };
        let mut sizes: Vec<(u64, u32)> = Vec::new();
        for e in &trace.events {
            match &e.event {
                Event::PlanStart { .. } => r.plans += 1,
                Event::PlanFailed { .. } => r.plan_failures += 1,
                Event::CacheQuery { hit, .. } => {
                    r.cache_queries += 1;
                    if *hit {
                        r.hits += 1;
                    } else {
                        r.misses += 1;
                    }
                }
                Event::QueryIssued { purpose, tokens_in, tokens_out, .. } => {
                    if purpose.is_oracle() {
                        r.oracle_queries += 1;
                    } else {
                        r.draft_queries += 1;
                    }
                    r.tokens_in += *tokens_in as u64;
                    r.tokens_out += *tokens_out as u64;
                    r.cost += cost_model.cost(*tokens_in as u64, *tokens_out as u64);
                }
                Event::QuerySuppressed { .. } => r.suppressed += 1,
                Event::QueryCancelled { .. } => r.stale += 1,
                Event::Resolved { outcome, .. } => match outcome {
                    Resolution::Confirmed => r.confirmed += 1,
                    Resolution::Corrected => r.corrected += 1,
                    Resolution::Stale => r.stale += 1,
                    Resolution::MissInsert => {}
                },
                Event::Preempt { .. } => r.preempts += 1,
                Event::MissFallback { stall } => {
                    r.stall_ticks += stall;
                    r.fallback_latencies.push(*stall);
                }
                Event::Stall { ticks, .. } => r.stall_ticks += ticks,
                Event::Replan { .. } => r.replans += 1,
                Event::EnvPerturb { .. } => r.perturbations += 1,
                Event::CacheSize { entries } => sizes.push((e.tick, *entries)),
                Event::Verify { drafted, accepted } => r.rollback_depths.push(drafted - accepted),
                Event::RollbackStart { .. } => r.rollback_spans += 1,
                Event::EpisodeEnd { delivered, total, ticks, success } => {
                    r.delivered = *delivered;
                    r.total = *total;
                    r.ticks = *ticks;
                    r.success = *success;
                }
                _ => {}
            }
        }
        r.accuracy = crate::analysis::accuracy_series(trace);
        if !sizes.is_empty() {
            r.cache_growth = GROWTH_CHECKPOINTS
                .iter()
                .map(|&t| (t, sizes.iter().take_while(|(at, _)| *at <= t).last().map_or(sizes[0].1, |s| s.1)))
                .collect();
        }
        r
    }

    pub fn mean_fallback(&self) -> Option<f64> {
        if self.fallback_latencies.is_empty() {
            return None;
        }
        Some(self.fallback_latencies.iter().sum::<u64>() as f64 / self.fallback_latencies.len() as f64)
    }

    pub fn mean_rollback_depth(&self) -> Option<f64> {
        mean_u32(&self.rollback_depths)
    }
}

fn mean_u32(v: &[u32]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64)
}

/// Mean metrics over a group of episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenario: String,
    pub strategy: String,
    pub episodes: usize,
    pub success: f64,
    pub ticks: f64,
    pub stall_ticks: f64,
    pub oracle_queries: f64,
    pub tokens: f64,
    pub cost: f64,
    pub hit_rate: Option<f64>,
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

impl Aggregate {
    pub fn of(reports: &[EpisodeReport]) -> Option<Aggregate> {
        let first = reports.first()?;
        let cq: u64 = reports.iter().map(|r| r.cache_queries).sum();
        let hits: u64 = reports.iter().map(|r| r.hits).sum();
        Some(Aggregate {
            scenario: first.scenario.clone(),
            strategy: first.strategy.clone(),
            episodes: reports.len(),
            success: mean(reports.iter().map(|r| r.success)),
            ticks: mean(reports.iter().map(|r| r.ticks as f64)),
            stall_ticks: mean(reports.iter().map(|r| r.stall_ticks as f64)),
            oracle_queries: mean(reports.iter().map(|r| r.oracle_queries as f64)),
            tokens: mean(reports.iter().map(|r| (r.tokens_in + r.tokens_out) as f64)),
            cost: mean(reports.iter().map(|r| r.cost)),
            hit_rate: (cq > 0).then(|| hits as f64 / cq as f64),
        })
    }
}

/// Groups reports by (scenario, strategy) in first-seen order.
pub fn aggregate(reports: &[EpisodeReport]) -> Vec<Aggregate> {
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in reports {
        let k = (r.scenario.as_str(), r.strategy.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .filter_map(|(s, st)| {
            let group: Vec<EpisodeReport> =
                reports.iter().filter(|r| r.scenario == s && r.strategy == st).cloned().collect();
            Aggregate::of(&group)
        })
        .collect()
}

pub const CSV_HEADER: &str =
    "scenario,strategy,seed,SR,L,stall,T,C,queries,hits,misses,confirmed,corrected,stale,preempts,replans";

/// One row per episode.
pub fn to_csv(reports: &[EpisodeReport]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in reports {
        writeln!(
            s,
            "{},{},{},{:.4},{},{},{},{:.6},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.strategy,
            r.seed,
            r.success,
            r.ticks,
            r.stall_ticks,
            r.tokens_in + r.tokens_out,
            r.cost,
            r.oracle_queries,
            r.hits,
            r.misses,
            r.confirmed,
            r.corrected,
            r.stale,
            r.preempts,
            r.replans
        )
        .expect("writing to a string");
    }
    s
}

/// Aggregate table with columns SR, L, T, C.
pub fn table(aggs: &[Aggregate]) -> String {
    let mut s = format!(
        "{:<20} {:<14} {:>4} {:>7} {:>9} {:>9} {:>10} {:>10}\n",
        "scenario", "strategy", "n", "SR", "L", "stall", "T", "C"
    );
    for a in aggs {
        writeln!(
            s,
            "{:<20} {:<14} {:>4} {:>7.3} {:>9.1} {:>9.1} {:>10.0} {:>10.4}",
            a.scenario, a.strategy, a.episodes, a.success, a.ticks, a.stall_ticks, a.tokens, a.cost
        )
        .expect("writing to a string");
    }
    s
}

/// Median stored-entry count at each checkpoint, over reports that track a cache.
pub fn median_growth(reports: &[EpisodeReport]) -> Vec<(u64, f64)> {
    let with: Vec<&EpisodeReport> = reports.iter().filter(|r| !r.cache_growth.is_empty()).collect();
    if with.is_empty() {
        return Vec::new();
    }
    GROWTH_CHECKPOINTS
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut v: Vec<u32> = with.iter().map(|r| r.cache_growth[i].1).collect();
            v.sort_unstable();
            let n = v.len();
            let m = if n % 2 == 1 { v[n / 2] as f64 } else { (v[n / 2 - 1] as f64 + v[n / 2] as f64) / 2.0 };
            (t, m)
        })
        .collect()
}

pub fn growth_table(reports: &[EpisodeReport]) -> String {
    let mut s = String::from("tick      N\n");
    for (t, n) in median_growth(reports) {
        writeln!(s, "{t:<9} {n}").expect("writing to a string");
    }
    s
}

/// The machine-readable report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema: String,
    pub aggregates: Vec<Aggregate>,
    pub episodes: Vec<EpisodeReport>,
}

impl ReportFile {
    pub fn new(episodes: Vec<EpisodeReport>) -> Self {
        ReportFile { schema: REPORT_SCHEMA.into(), aggregates: aggregate(&episodes), episodes }
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let f: ReportFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if f.schema != REPORT_SCHEMA {
            return Err(format!("unsupported report schema `{}`", f.schema));
        }
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(success: f64) -> EpisodeReport {
        let t = Trace {
            header: crate::trace::TraceHeader {
                schema: crate::trace::TRACE_SCHEMA.into(),
                scenario: "s".into(),
                strategy: "sync".into(),
                seed: 0,
                agents: 1,
                budget: 10,
                fields: vec![],
                price_in: 0.0,
                price_out: 0.0,
            },
            events: vec![crate::trace::TraceEvent {
                tick: 3,
                agent: None,
                event: Event::EpisodeEnd { delivered: 0, total: 1, ticks: 3, success },
            }],
        };
        EpisodeReport::from_trace(&t)
    }

    #[test]
    fn empty_csv_is_header_only() {
        assert_eq!(to_csv(&[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn mean_success_is_arithmetic_mean() {
        let a = Aggregate::of(&[rep(1.0), rep(0.4)]).unwrap();
        assert!((a.success - 0.7).abs() < 1e-12);
        assert_eq!(to_csv(&[rep(1.0), rep(0.4)]).lines().count(), 3);
    }
}
