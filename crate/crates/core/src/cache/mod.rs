// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! The plan-transition cache.
//!
//! Each entry is a verb-level 2-gram `from -> to` carrying the integer range of
//! task-state metadata under which the transition has been observed and a
//! transition count. Per-plan statistics track how often a plan was offered as
//! a feasible candidate and how often the oracle confirmed it. A query filters
//! entries by previous plan and range, scores survivors by
//! `count * importance(to)` and returns the argmax.

mod format;

pub use format::FormatError;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, MutexGuard};

use crate::plan::PlanKind;
use crate::state::{FieldSchema, MetadataRange, StateVector};

/// Bytes of per-entry overhead on top of the metadata fields.
pub const ENTRY_HEADER_BYTES: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CacheError {
    #[error("state schema `{got}` does not match cache schema `{expected}`")]
    SchemaMismatch { expected: String, got: String },
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// An exact non-negative rational score.
#[derive(Debug, Clone, Copy)]
pub struct Score {
    num: u64,
    den: u64,
}

impl Score {
    pub const ZERO: Score = Score { num: 0, den: 1 };

    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "score denominator must be positive");
        Score { num, den }
    }

    pub fn numer(&self) -> u64 {
        self.num
    }

    pub fn denom(&self) -> u64 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Score {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Score {}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Score {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheEntry {
    pub from: PlanKind,
    pub to: PlanKind,
    pub range: MetadataRange,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PlanStats {
    pub candidate_count: u64,
    pub confirm_count: u64,
}

impl PlanStats {
    /// Smoothed confirmation ratio `(conf + 1) / (cand + 1)`, clamped to 1.
    pub fn importance(&self) -> Score {
        let den = self.candidate_count + 1;
        Score::new((self.confirm_count + 1).min(den), den)
    }
}

/// A feasible candidate returned by [`PlanCache::feasible_set`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub entry: CacheEntry,
    pub score: Score,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Hit { plan: PlanKind, score: Score },
    Miss,
}

impl Selection {
    pub fn plan(&self) -> Option<PlanKind> {
        match self {
            Selection::Hit { plan, .. } => Some(*plan),
            Selection::Miss => None,
        }
    }
}

/// One prefill record: a transition with its observed count and range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefillTransition {
    pub from: PlanKind,
    pub to: PlanKind,
    pub count: u64,
    pub range: MetadataRange,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanCache {
    schema: Arc<FieldSchema>,
    entries: BTreeMap<(PlanKind, PlanKind), EntryData>,
    stats: BTreeMap<PlanKind, PlanStats>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct EntryData {
    range: MetadataRange,
    count: u64,
}

/// Orders candidates best-first: score, then count, then verb name.
fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .cmp(&a.score)
        .then(b.entry.count.cmp(&a.entry.count))
        .then(a.entry.to.lex_cmp(b.entry.to))
}

impl PlanCache {
    pub fn new(schema: Arc<FieldSchema>) -> Self {
        PlanCache { schema, entries: BTreeMap::new(), stats: BTreeMap::new() }
    }

    pub fn schema(&self) -> &Arc<FieldSchema> {
        &self.schema
    }

    /// Number of stored transitions, including those whose count fell to zero.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Memory footprint `N * (4 + Σ s_i)`.
    pub fn size_bytes(&self) -> usize {
        self.entries.len() * (ENTRY_HEADER_BYTES + self.schema.row_bytes())
    }

    pub fn entry(&self, from: PlanKind, to: PlanKind) -> Option<CacheEntry> {
        self.entries.get(&(from, to)).map(|d| CacheEntry {
            from,
            to,
            range: d.range.clone(),
            count: d.count,
        })
    }

    pub fn entries(&self) -> impl Iterator<Item = CacheEntry> + '_ {
        self.entries.iter().map(|(&(from, to), d)| CacheEntry {
            from,
            to,
            range: d.range.clone(),
            count: d.count,
        })
    }

    pub fn stats(&self, plan: PlanKind) -> PlanStats {
        self.stats.get(&plan).copied().unwrap_or_default()
    }

    pub fn stats_rows(&self) -> impl Iterator<Item = (PlanKind, PlanStats)> + '_ {
        self.stats.iter().map(|(&k, &s)| (k, s))
    }

    pub fn importance(&self, plan: PlanKind) -> Score {
        self.stats(plan).importance()
    }

    fn check(&self, state: &StateVector) -> Result<(), CacheError> {
        if state.conforms_to(&self.schema) {
            Ok(())
        } else {
            Err(CacheError::SchemaMismatch {
                expected: self.schema.to_string(),
                got: state.schema().to_string(),
            })
        }
    }

    fn check_range(&self, range: &MetadataRange) -> Result<(), CacheError> {
        if range.len() == self.schema.len() {
            Ok(())
        } else {
            Err(CacheError::SchemaMismatch {
                expected: self.schema.to_string(),
                got: format!("{} fields", range.len()),
            })
        }
    }

    /// Entries leaving `prev` whose range contains `state`, scored with the
    /// statistics as they stood before this query. Each returned candidate's
    /// target plan has its candidate count incremented.
    pub fn feasible_set(
        &mut self,
        prev: PlanKind,
        state: &StateVector,
    ) -> Result<Vec<Candidate>, CacheError> {
        self.check(state)?;
        let values = state.values();
        let mut out = Vec::new();
        for (&(from, to), d) in self.entries.range((prev, PlanKind::Explore)..) {
            if from != prev {
                break;
            }
            if !d.range.contains(values) {
                continue;
            }
            let imp = self.stats.get(&to).copied().unwrap_or_default().importance();
            let score = Score::new(d.count * imp.num, imp.den);
            out.push(Candidate {
                entry: CacheEntry { from, to, range: d.range.clone(), count: d.count },
                score,
            });
        }
        for c in &out {
            self.stats.entry(c.entry.to).or_default().candidate_count += 1;
        }
        Ok(out)
    }

    /// Highest-scoring feasible transition, or a miss when nothing scores above zero.
    pub fn select(&mut self, prev: PlanKind, state: &StateVector) -> Result<Selection, CacheError> {
        self.query(prev, state).map(|(s, _)| s)
    }

    /// Like [`select`](Self::select), also returning the feasible-set size.
    pub fn query(&mut self, prev: PlanKind, state: &StateVector) -> Result<(Selection, usize), CacheError> {
        let mut cands = self.feasible_set(prev, state)?;
        let n = cands.len();
        cands.retain(|c| !c.score.is_zero());
        let sel = cands
            .into_iter()
            .min_by(rank)
            .map_or(Selection::Miss, |c| Selection::Hit { plan: c.entry.to, score: c.score });
        Ok((sel, n))
    }

    /// Records one observed or confirmed occurrence of `from -> to` at `state`.
    pub fn reinforce(
        &mut self,
        from: PlanKind,
        to: PlanKind,
        state: &StateVector,
    ) -> Result<(), CacheError> {
        self.check(state)?;
        let values = state.values();
        self.entries
            .entry((from, to))
            .and_modify(|d| {
                d.count += 1;
                d.range.widen(values);
            })
            .or_insert_with(|| EntryData { range: MetadataRange::point(values), count: 1 });
        self.stats.entry(to).or_default().confirm_count += 1;
        Ok(())
    }

    /// Decrements a mispredicted transition, flooring at zero. The entry and
    /// its range stay in place. Absent entries are left alone.
    pub fn penalize(&mut self, from: PlanKind, wrong_to: PlanKind) {
        if let Some(d) = self.entries.get_mut(&(from, wrong_to)) {
            d.count = d.count.saturating_sub(1);
            let s = self.stats.entry(wrong_to).or_default();
            s.confirm_count = s.confirm_count.saturating_sub(1);
        }
    }

    /// Warm-starts the cache. Existing keys merge by count sum and range union.
    pub fn prefill<I>(&mut self, transitions: I) -> Result<(), CacheError>
    where
        I: IntoIterator<Item = PrefillTransition>,
    {
        let transitions: Vec<_> = transitions.into_iter().collect();
        for t in &transitions {
            self.check_range(&t.range)?;
        }
        for t in transitions {
            match self.entries.get_mut(&(t.from, t.to)) {
                Some(d) => {
                    d.count += t.count;
                    d.range.union(&t.range);
                }
                None => {
                    self.entries.insert((t.from, t.to), EntryData { range: t.range, count: t.count });
                }
            }
            let s = self.stats.entry(t.to).or_default();
            s.confirm_count += t.count;
            s.candidate_count += t.count;
        }
        Ok(())
    }

    pub fn serialize(&self) -> String {
        format::write(self)
    }

    pub fn deserialize(text: &str) -> Result<Self, FormatError> {
        format::read(text)
    }

    pub(crate) fn insert_raw(&mut self, entry: CacheEntry) -> bool {
        self.stats.entry(entry.to).or_default();
        self.entries
            .insert((entry.from, entry.to), EntryData { range: entry.range, count: entry.count })
            .is_none()
    }

    pub(crate) fn set_stats_raw(&mut self, plan: PlanKind, stats: PlanStats) {
        self.stats.insert(plan, stats);
    }
}

/// A cache behind one coarse lock, for use from concurrently running actors.
#[derive(Debug, Clone)]
pub struct SharedCache(Arc<Mutex<PlanCache>>);

impl SharedCache {
    pub fn new(cache: PlanCache) -> Self {
        SharedCache(Arc::new(Mutex::new(cache)))
    }

    pub fn lock(&self) -> MutexGuard<'_, PlanCache> {
        // A panic while holding the lock cannot leave a half-applied update:
        // every mutation completes before the guard is released.
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn snapshot(&self) -> PlanCache {
        self.lock().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{FieldSpec, FieldWidth};

    fn schema() -> Arc<FieldSchema> {
        Arc::new(FieldSchema::numeric(&["steps", "items"]))
    }

    fn sv(s: &Arc<FieldSchema>, v: &[u32]) -> StateVector {
        StateVector::new(s.clone(), v.to_vec()).unwrap()
    }

    fn cache_with(s: &Arc<FieldSchema>, from: PlanKind, to: PlanKind, count: u64, range: Vec<(u32, u32)>) -> PlanCache {
        let mut c = PlanCache::new(s.clone());
        c.insert_raw(CacheEntry { from, to, range: MetadataRange::new(range).unwrap(), count });
        c
    }

    #[test]
    fn scores_with_smoothed_importance() {
        let s = schema();
        let mut c = cache_with(&s, PlanKind::GoGrasp, PlanKind::Transport, 3, vec![(0, 100), (0, 2)]);
        c.set_stats_raw(PlanKind::Transport, PlanStats { candidate_count: 3, confirm_count: 2 });
        let f = c.feasible_set(PlanKind::GoGrasp, &sv(&s, &[10, 1])).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].score, Score::new(9, 4));
        assert_eq!(f[0].score.as_f64(), 2.25);
        assert_eq!(c.stats(PlanKind::Transport).candidate_count, 4);
    }

    #[test]
    fn empty_cache_has_no_candidates() {
        let s = schema();
        let mut c = PlanCache::new(s.clone());
        assert!(c.feasible_set(PlanKind::Wait, &sv(&s, &[0, 0])).unwrap().is_empty());
        assert_eq!(c.select(PlanKind::Wait, &sv(&s, &[0, 0])).unwrap(), Selection::Miss);
    }

    #[test]
    fn step_range_mismatch_filters_entry() {
        let s = schema();
        let mut c = cache_with(&s, PlanKind::GoTo, PlanKind::Explore, 5, vec![(0, 80), (0, 2)]);
        assert!(c.feasible_set(PlanKind::GoTo, &sv(&s, &[99, 0])).unwrap().is_empty());
        assert_eq!(c.feasible_set(PlanKind::GoTo, &sv(&s, &[80, 0])).unwrap().len(), 1);
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let s = schema();
        let other = Arc::new(FieldSchema::numeric(&["steps"]));
        let mut c = PlanCache::new(s);
        let err = c.select(PlanKind::Wait, &sv(&other, &[1])).unwrap_err();
        assert!(matches!(err, CacheError::SchemaMismatch { .. }));
        assert!(c.reinforce(PlanKind::Wait, PlanKind::Explore, &sv(&other, &[1])).is_err());
    }

    #[test]
    fn select_picks_strict_argmax() {
        let s = schema();
        let mut c = PlanCache::new(s.clone());
        let r = || MetadataRange::new(vec![(0, 10), (0, 10)]).unwrap();
        c.insert_raw(CacheEntry { from: PlanKind::GoGrasp, to: PlanKind::Transport, range: r(), count: 3 });
        c.insert_raw(CacheEntry { from: PlanKind::GoGrasp, to: PlanKind::PutInto, range: r(), count: 1 });
        c.set_stats_raw(PlanKind::Transport, PlanStats { candidate_count: 3, confirm_count: 2 });
        c.set_stats_raw(PlanKind::PutInto, PlanStats { candidate_count: 0, confirm_count: 0 });
        // 2.25 vs 1.0
        let sel = c.select(PlanKind::GoGrasp, &sv(&s, &[1, 1])).unwrap();
        assert_eq!(sel.plan(), Some(PlanKind::Transport));
    }

    #[test]
    fn zero_counts_are_a_miss() {
        let s = schema();
        let mut c = cache_with(&s, PlanKind::GoGrasp, PlanKind::Transport, 0, vec![(0, 10), (0, 10)]);
        assert_eq!(c.select(PlanKind::GoGrasp, &sv(&s, &[1, 1])).unwrap(), Selection::Miss);
    }

    #[test]
    fn ties_break_on_count_then_name() {
        let s = schema();
        let mut c = PlanCache::new(s.clone());
        let r = || MetadataRange::new(vec![(0, 10), (0, 10)]).unwrap();
        c.insert_raw(CacheEntry { from: PlanKind::Explore, to: PlanKind::GoTo, range: r(), count: 2 });
        c.insert_raw(CacheEntry { from: PlanKind::Explore, to: PlanKind::GoGrasp, range: r(), count: 2 });
        for k in [PlanKind::GoTo, PlanKind::GoGrasp] {
            c.set_stats_raw(k, PlanStats { candidate_count: 1, confirm_count: 1 });
        }
        assert_eq!(c.select(PlanKind::Explore, &sv(&s, &[0, 0])).unwrap().plan(), Some(PlanKind::GoGrasp));

        // 4 * 2/6 == 2 * 2/3 after the first query bumped candidate counts; the higher count wins
        c.insert_raw(CacheEntry { from: PlanKind::Explore, to: PlanKind::Wait, range: r(), count: 4 });
        c.set_stats_raw(PlanKind::Wait, PlanStats { candidate_count: 5, confirm_count: 1 });
        let mut probe = c.clone();
        let f = probe.feasible_set(PlanKind::Explore, &sv(&s, &[0, 0])).unwrap();
        let wait = f.iter().find(|x| x.entry.to == PlanKind::Wait).unwrap();
        let grasp = f.iter().find(|x| x.entry.to == PlanKind::GoGrasp).unwrap();
        assert_eq!(wait.score, grasp.score);
        assert_eq!(c.select(PlanKind::Explore, &sv(&s, &[0, 0])).unwrap().plan(), Some(PlanKind::Wait));
    }

    #[test]
    fn reinforce_increments_and_creates() {
        let s = schema();
        let mut c = cache_with(&s, PlanKind::GoGrasp, PlanKind::Transport, 3, vec![(117, 117), (1, 1)]);
        c.set_stats_raw(PlanKind::Transport, PlanStats { candidate_count: 3, confirm_count: 2 });
        c.reinforce(PlanKind::GoGrasp, PlanKind::Transport, &sv(&s, &[99, 1])).unwrap();
        let e = c.entry(PlanKind::GoGrasp, PlanKind::Transport).unwrap();
        assert_eq!(e.count, 4);
        assert_eq!(e.range.bounds()[0], (99, 117));
        assert_eq!(c.stats(PlanKind::Transport).confirm_count, 3);

        c.reinforce(PlanKind::Transport, PlanKind::GoTo, &sv(&s, &[5, 0])).unwrap();
        let e = c.entry(PlanKind::Transport, PlanKind::GoTo).unwrap();
        assert_eq!(e.count, 1);
        assert_eq!(e.range, MetadataRange::point(&[5, 0]));
    }

    #[test]
    fn penalize_floors_and_retains() {
        let s = schema();
        let mut c = cache_with(&s, PlanKind::GoGrasp, PlanKind::Transport, 1, vec![(0, 10), (0, 10)]);
        c.set_stats_raw(PlanKind::Transport, PlanStats { candidate_count: 9, confirm_count: 5 });
        c.penalize(PlanKind::GoGrasp, PlanKind::Transport);
        assert_eq!(c.entry(PlanKind::GoGrasp, PlanKind::Transport).unwrap().count, 0);
        assert_eq!(c.stats(PlanKind::Transport).confirm_count, 4);
        assert_eq!(c.importance(PlanKind::Transport), Score::new(1, 2));
        assert_eq!(c.select(PlanKind::GoGrasp, &sv(&s, &[1, 1])).unwrap(), Selection::Miss);

        c.penalize(PlanKind::GoGrasp, PlanKind::Transport);
        assert_eq!(c.entry(PlanKind::GoGrasp, PlanKind::Transport).unwrap().count, 0);
        assert_eq!(c.len(), 1);

        let before = c.clone();
        c.penalize(PlanKind::Wait, PlanKind::Explore);
        assert_eq!(c, before);
    }

    #[test]
    fn prefill_merges_by_key() {
        let s = schema();
        let mut c = PlanCache::new(s.clone());
        c.prefill([
            PrefillTransition {
                from: PlanKind::GoGrasp,
                to: PlanKind::PutInto,
                count: 2,
                range: MetadataRange::new(vec![(0, 5), (1, 1)]).unwrap(),
            },
            PrefillTransition {
                from: PlanKind::GoGrasp,
                to: PlanKind::PutInto,
                count: 3,
                range: MetadataRange::new(vec![(4, 9), (1, 2)]).unwrap(),
            },
        ])
        .unwrap();
        assert_eq!(c.len(), 1);
        let e = c.entry(PlanKind::GoGrasp, PlanKind::PutInto).unwrap();
        assert_eq!(e.count, 5);
        assert_eq!(e.range.bounds(), &[(0, 9), (1, 2)]);
        assert_eq!(c.stats(PlanKind::PutInto), PlanStats { candidate_count: 5, confirm_count: 5 });
    }

    #[test]
    fn prefill_rejects_wrong_arity() {
        let mut c = PlanCache::new(schema());
        let err = c
            .prefill([PrefillTransition {
                from: PlanKind::Wait,
                to: PlanKind::Explore,
                count: 1,
                range: MetadataRange::new(vec![(0, 1)]).unwrap(),
            }])
            .unwrap_err();
        assert!(matches!(err, CacheError::SchemaMismatch { .. }));
        assert!(c.is_empty());
    }

    #[test]
    fn size_formula_counts_field_widths() {
        let s = Arc::new(
            FieldSchema::new(vec![
                FieldSpec { name: "a".into(), width: FieldWidth::Numeric },
                FieldSpec { name: "b".into(), width: FieldWidth::Binary },
            ])
            .unwrap(),
        );
        let mut c = PlanCache::new(s.clone());
        for (i, k) in PlanKind::ALL.iter().enumerate() {
            c.reinforce(PlanKind::Wait, *k, &sv(&s, &[i as u32, 1])).unwrap();
        }
        assert_eq!(c.size_bytes(), 6 * (4 + 4 + 1));
    }

    #[test]
    fn shared_cache_serializes_access() {
        let s = schema();
        let shared = SharedCache::new(PlanCache::new(s.clone()));
        std::thread::scope(|scope| {
            for _ in 0..4 {
                let shared = shared.clone();
                let s = s.clone();
                scope.spawn(move || {
                    for i in 0..250u32 {
                        shared
                            .lock()
                            .reinforce(PlanKind::GoGrasp, PlanKind::PutInto, &sv(&s, &[i, 1]))
                            .unwrap();
                    }
                });
            }
        });
        let c = shared.snapshot();
        assert_eq!(c.entry(PlanKind::GoGrasp, PlanKind::PutInto).unwrap().count, 1000);
        assert_eq!(c.stats(PlanKind::PutInto).confirm_count, 1000);
    }
}
