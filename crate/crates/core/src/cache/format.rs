// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Line-oriented `.pcache` text format.
//!
//! ```text
//! PCACHE v1
//! SCHEMA steps:4,items:4
//! E GoGrasp Transport 3 0:80,1:2
//! S Transport 3 2
//! ```
//!
//! An entry with an empty schema writes `-` in place of the range list.

use std::fmt::Write as _;
use std::sync::Arc;

use super::{CacheEntry, PlanCache, PlanStats};
use crate::plan::PlanKind;
use crate::state::{FieldSchema, MetadataRange};

pub const MAGIC: &str = "PCACHE v1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError { line, message: message.into() }
}

pub(super) fn write(cache: &PlanCache) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let _ = writeln!(out, "SCHEMA {}", cache.schema());
    for e in cache.entries() {
        let _ = write!(out, "E {} {} {} ", e.from, e.to, e.count);
        if e.range.is_empty() {
            out.push('-');
        }
        for (i, (lo, hi)) in e.range.bounds().iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{lo}:{hi}");
        }
        out.push('\n');
    }
    for (k, s) in cache.stats_rows() {
        let _ = writeln!(out, "S {} {} {}", k, s.candidate_count, s.confirm_count);
    }
    out
}

fn parse_u64(tok: &str, line: usize, what: &str) -> Result<u64, FormatError> {
    tok.parse().map_err(|_| err(line, format!("invalid {what} `{tok}`")))
}

fn parse_kind(tok: &str, line: usize) -> Result<PlanKind, FormatError> {
    tok.parse().map_err(|e| err(line, format!("{e}")))
}

fn parse_range(tok: &str, arity: usize, line: usize) -> Result<MetadataRange, FormatError> {
    let mut bounds = Vec::with_capacity(arity);
    if tok != "-" {
        for part in tok.split(',') {
            let (lo, hi) =
                part.split_once(':').ok_or_else(|| err(line, format!("malformed bound `{part}`")))?;
            let lo = lo.parse::<u32>().map_err(|_| err(line, format!("invalid min `{lo}`")))?;
            let hi = hi.parse::<u32>().map_err(|_| err(line, format!("invalid max `{hi}`")))?;
            bounds.push((lo, hi));
        }
    }
    if bounds.len() != arity {
        return Err(err(line, format!("expected {arity} bounds, found {}", bounds.len())));
    }
    MetadataRange::new(bounds).map_err(|e| err(line, e.to_string()))
}

pub(super) fn read(text: &str) -> Result<PlanCache, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim_end() == MAGIC => {}
        Some((n, l)) => return Err(err(n, format!("expected `{MAGIC}`, found `{l}`"))),
        None => return Err(err(1, "empty input")),
    }
    let schema: FieldSchema = match lines.next() {
        Some((n, l)) => {
            let rest = l
                .strip_prefix("SCHEMA")
                .ok_or_else(|| err(n, "expected SCHEMA line"))?;
            rest.trim().parse().map_err(|e| err(n, format!("{e}")))?
        }
        None => return Err(err(2, "missing SCHEMA line")),
    };
    let arity = schema.len();
    let mut cache = PlanCache::new(Arc::new(schema));
    let mut seen_stats = Vec::new();
    for (n, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => continue,
            ["E", from, to, count, range] => {
                let entry = CacheEntry {
                    from: parse_kind(from, n)?,
                    to: parse_kind(to, n)?,
                    count: parse_u64(count, n, "count")?,
                    range: parse_range(range, arity, n)?,
                };
                let key = (entry.from, entry.to);
                if !cache.insert_raw(entry) {
                    return Err(err(n, format!("duplicate entry {} -> {}", key.0, key.1)));
                }
            }
            ["S", kind, cand, conf] => {
                let kind = parse_kind(kind, n)?;
                if seen_stats.contains(&kind) {
                    return Err(err(n, format!("duplicate stats for {kind}")));
                }
                seen_stats.push(kind);
                cache.set_stats_raw(
                    kind,
                    PlanStats {
                        candidate_count: parse_u64(cand, n, "candidate count")?,
                        confirm_count: parse_u64(conf, n, "confirm count")?,
                    },
                );
            }
            _ => return Err(err(n, format!("unrecognized line `{line}`"))),
        }
    }
    Ok(cache)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::StateVector;

    #[test]
    fn empty_cache_is_header_only() {
        let c = PlanCache::new(Arc::new(FieldSchema::numeric(&["steps"])));
        let text = c.serialize();
        assert_eq!(text, "PCACHE v1\nSCHEMA steps:4\n");
        assert_eq!(PlanCache::deserialize(&text).unwrap(), c);
    }

    #[test]
    fn round_trips_entries_and_stats() {
        let s = Arc::new("steps:4,flag:1".parse::<FieldSchema>().unwrap());
        let mut c = PlanCache::new(s.clone());
        let st = |a, b| StateVector::new(s.clone(), vec![a, b]).unwrap();
        c.reinforce(PlanKind::GoGrasp, PlanKind::Transport, &st(3, 1)).unwrap();
        c.reinforce(PlanKind::GoGrasp, PlanKind::Transport, &st(9, 0)).unwrap();
        c.reinforce(PlanKind::Explore, PlanKind::GoTo, &st(1, 0)).unwrap();
        c.penalize(PlanKind::Explore, PlanKind::GoTo);
        c.select(PlanKind::GoGrasp, &st(4, 1)).unwrap();
        let back = PlanCache::deserialize(&c.serialize()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn empty_schema_round_trips() {
        let mut c = PlanCache::new(Arc::new(FieldSchema::default()));
        let s = StateVector::new(c.schema().clone(), vec![]).unwrap();
        c.reinforce(PlanKind::Wait, PlanKind::Explore, &s).unwrap();
        let text = c.serialize();
        assert!(text.contains("\nE Wait Explore 1 -\n"));
        assert_eq!(PlanCache::deserialize(&text).unwrap(), c);
    }

    #[test]
    fn rejects_inverted_range_with_line_number() {
        let text = "PCACHE v1\nSCHEMA steps:4\nE GoGrasp Transport 1 5:5\nE GoTo Explore 2 9:3\n";
        let e = PlanCache::deserialize(text).unwrap_err();
        assert_eq!(e.line, 4);
        assert!(e.message.contains("min"));
    }

    #[test]
    fn rejects_malformed_lines() {
        for (text, line) in [
            ("PCACHE v2\n", 1),
            ("PCACHE v1\nSCHEMA steps:3\n", 2),
            ("PCACHE v1\nSCHEMA steps:4\nE Fly Transport 1 0:1\n", 3),
            ("PCACHE v1\nSCHEMA steps:4\nE GoTo Transport x 0:1\n", 3),
            ("PCACHE v1\nSCHEMA steps:4\nE GoTo Transport 1 0:1,2:3\n", 3),
            ("PCACHE v1\nSCHEMA steps:4\nS GoTo 1\n", 3),
            ("PCACHE v1\nSCHEMA steps:4\nS GoTo 1 1\nS GoTo 1 1\n", 4),
            ("PCACHE v1\nSCHEMA steps:4\nE GoTo Wait 1 0:1\nE GoTo Wait 1 0:1\n", 4),
            ("PCACHE v1\n", 2),
        ] {
            assert_eq!(PlanCache::deserialize(text).unwrap_err().line, line, "{text:?}");
        }
    }
}
