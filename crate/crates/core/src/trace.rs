// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Episode traces: a header line followed by one JSON event per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::env::layout::Pos;
use crate::plan::{PlanId, PlanKind};

pub const TRACE_SCHEMA: &str = "plancache-trace v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: String,
    pub scenario: String,
    pub strategy: String,
    pub seed: u64,
    pub agents: u32,
    pub budget: u64,
    /// Names of the metadata fields carried in `state` payloads.
    pub fields: Vec<String>,
    pub price_in: f64,
    pub price_out: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryPurpose {
    /// Background validation query of the updater.
    Periodic,
    /// Blocking fallback after a cache miss.
    Miss,
    /// Blocking next-plan query of the synchronous loop.
    Blocking,
    /// Next-plan query issued at plan start.
    Lookahead,
    /// Blocking re-query after a prefetched plan went stale.
    Replan,
    /// Draft proposal of the speculative drafter.
    Draft,
    /// Batched verification of a speculation window.
    Verify,
}

impl QueryPurpose {
    /// Whether the query goes to the large planner (drafts do not).
    pub fn is_oracle(self) -> bool {
        self != QueryPurpose::Draft
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoldKind {
    Confirmation,
    Correction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Confirmed,
    Corrected,
    MissInsert,
    Stale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StallCause {
    Blocking,
    Lookahead,
    Replan,
    Draft,
    Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Event {
    PlanStart {
        plan: PlanId,
        serial: u64,
        /// Cache-key predecessor.
        prev: PlanKind,
        state: Vec<u32>,
        ticks: u32,
    },
    PlanEnd {
        plan: PlanId,
        serial: u64,
    },
    PlanFailed {
        plan: PlanId,
        serial: u64,
    },
    CacheQuery {
        prev: PlanKind,
        hit: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        plan: Option<PlanKind>,
        /// Winning score as numerator and denominator.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        score: Option<(u64, u64)>,
        candidates: u32,
    },
    QueryIssued {
        query: u64,
        purpose: QueryPurpose,
        tokens_in: u32,
        tokens_out: u32,
        due: u64,
    },
    /// A query withdrawn before its answer arrived.
    QueryCancelled {
        query: u64,
    },
    QuerySuppressed {
        reason: HoldKind,
    },
    OracleResponse {
        query: u64,
        plan: PlanId,
    },
    Resolved {
        query: u64,
        outcome: Resolution,
        plan: PlanId,
        /// Serial of the plan that holds further queries back.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hold: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hold_kind: Option<HoldKind>,
    },
    HoldReleased {
        serial: u64,
    },
    Preempt {
        old: PlanId,
        old_serial: u64,
        new: PlanId,
    },
    MissFallback {
        stall: u64,
    },
    Stall {
        cause: StallCause,
        ticks: u64,
    },
    Replan {
        plan: PlanId,
    },
    EnvPerturb {
        object: u32,
        from: Pos,
        to: Pos,
    },
    CacheSize {
        entries: u32,
    },
    /// Correctness of the agent's running plan from this tick until the next
    /// judge event.
    Judge {
        correct: bool,
    },
    Verify {
        drafted: u32,
        accepted: u32,
    },
    /// Undo span of the draft with this serial; the corrective plan, if
    /// any, runs until the matching end.
    RollbackStart {
        plan: PlanId,
        serial: u64,
    },
    RollbackEnd {
        serial: u64,
    },
    AgentFailed {
        message: String,
    },
    EpisodeEnd {
        delivered: u32,
        total: u32,
        ticks: u64,
        success: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: u64,
    /// `None` for world-level events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<u32>,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Trace {
    pub fn write_jsonl(&self, mut w: impl Write) -> Result<(), TraceError> {
        serde_json::to_writer(&mut w, &self.header).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        for e in &self.events {
            serde_json::to_writer(&mut w, e).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Trace, TraceError> {
        let mut lines = r.lines().enumerate();
        let header: TraceHeader = match lines.next() {
            Some((_, l)) => serde_json::from_str(&l?).map_err(|e| TraceError::Parse { line: 1, message: e.to_string() })?,
            None => return Err(TraceError::Parse { line: 1, message: "empty trace".into() }),
        };
        if header.schema != TRACE_SCHEMA {
            return Err(TraceError::Parse { line: 1, message: format!("unsupported schema `{}`", header.schema) });
        }
        let mut events = Vec::new();
        for (i, l) in lines {
            let l = l?;
            if l.trim().is_empty() {
                continue;
            }
            let e = serde_json::from_str(&l).map_err(|e| TraceError::Parse { line: i + 1, message: e.to_string() })?;
            events.push(e);
        }
        Ok(Trace { header, events })
    }

    pub fn from_jsonl(text: &str) -> Result<Trace, TraceError> {
        Self::read_jsonl(text.as_bytes())
    }

    /// Events of one agent, in order.
    pub fn agent_events(&self, agent: u32) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.agent == Some(agent))
    }
}
