// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::BruteCache;
use plancache::analysis::{LocalityTable, MarkovChain};
use plancache::cache::{PlanCache, PrefillTransition, Selection};
use plancache::env::{compile, Dir, Layout, PlanInstance, Pos, Primitive, Scenario, World};
use plancache::plan::{PlanId, PlanKind};
use plancache::state::{FieldSchema, FieldSpec, FieldWidth, MetadataRange, StateVector};
use plancache::strategies::{run_episode, StrategyConfig, StrategyKind};
use plancache::trace::Trace;

const FIELDS: usize = 3;
const VMAX: u32 = 6;

#[derive(Debug, Clone)]
enum Op {
    Reinforce(PlanKind, PlanKind, Vec<u32>),
    Penalize(PlanKind, PlanKind),
    Select(PlanKind, Vec<u32>),
}

fn kind() -> impl Strategy<Value = PlanKind> {
    (0u8..6).prop_map(|c| PlanKind::from_code(c).unwrap())
}

fn values() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0..=VMAX, FIELDS)
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (kind(), kind(), values()).prop_map(|(a, b, v)| Op::Reinforce(a, b, v)),
        1 => (kind(), kind()).prop_map(|(a, b)| Op::Penalize(a, b)),
        3 => (kind(), values()).prop_map(|(a, v)| Op::Select(a, v)),
    ]
}

fn schema() -> Arc<FieldSchema> {
    Arc::new(FieldSchema::numeric(&["a", "b", "c"]))
}

fn sv(s: &Arc<FieldSchema>, v: &[u32]) -> StateVector {
    StateVector::new(s.clone(), v.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn select_matches_linear_scan(ops in prop::collection::vec(op(), 1..80)) {
        let s = schema();
        let mut cache = PlanCache::new(s.clone());
        let mut model = BruteCache::default();
        for op in ops {
            match op {
                Op::Reinforce(a, b, v) => {
                    cache.reinforce(a, b, &sv(&s, &v)).unwrap();
                    model.reinforce(a, b, &v);
                }
                Op::Penalize(a, b) => {
                    cache.penalize(a, b);
                    model.penalize(a, b);
                }
                Op::Select(p, v) => {
                    let want = model.select(p, &v);
                    let got = cache.select(p, &sv(&s, &v)).unwrap();
                    match (got, want) {
                        (Selection::Miss, None) => {}
                        (Selection::Hit { plan, score }, Some((wp, ws))) => {
                            prop_assert_eq!(plan, wp);
                            prop_assert_eq!((score.numer() as u128) * (*ws.denom() as u128),
                                            (*ws.numer() as u128) * (score.denom() as u128));
                        }
                        (g, w) => prop_assert!(false, "got {:?}, want {:?}", g, w),
                    }
                }
            }
        }
    }

    #[test]
    fn feasible_set_is_sound_and_complete(
        seed in prop::collection::vec((kind(), kind(), values()), 0..60),
        prev in kind(),
        probe in values(),
    ) {
        let s = schema();
        let mut cache = PlanCache::new(s.clone());
        let mut model = BruteCache::default();
        for (a, b, v) in &seed {
            cache.reinforce(*a, *b, &sv(&s, v)).unwrap();
            model.reinforce(*a, *b, v);
        }
        let got = cache.feasible_set(prev, &sv(&s, &probe)).unwrap();
        for c in &got {
            prop_assert_eq!(c.entry.from, prev);
            prop_assert!(c.entry.range.contains(&probe));
        }
        let mut got_keys: Vec<_> = got.iter().map(|c| (c.entry.to, c.entry.count)).collect();
        let mut want: Vec<_> = model.feasible(prev, &probe).iter().map(|e| (e.to, e.count)).collect();
        got_keys.sort();
        want.sort();
        prop_assert_eq!(got_keys, want);
    }

    #[test]
    fn ranges_only_widen(steps in prop::collection::vec((kind(), kind(), values()), 1..60)) {
        let s = schema();
        let mut cache = PlanCache::new(s.clone());
        let mut seen: HashMap<(PlanKind, PlanKind), Vec<Vec<u32>>> = HashMap::new();
        let mut last: HashMap<(PlanKind, PlanKind), Vec<(u32, u32)>> = HashMap::new();
        for (a, b, v) in steps {
            cache.reinforce(a, b, &sv(&s, &v)).unwrap();
            seen.entry((a, b)).or_default().push(v);
            let bounds = cache.entry(a, b).unwrap().range.bounds().to_vec();
            if let Some(old) = last.get(&(a, b)) {
                for (o, n) in old.iter().zip(&bounds) {
                    prop_assert!(n.0 <= o.0 && n.1 >= o.1);
                }
            }
            last.insert((a, b), bounds);
        }
        for ((a, b), states) in seen {
            let e = cache.entry(a, b).unwrap();
            for v in states {
                prop_assert!(e.range.contains(&v));
            }
        }
    }

    #[test]
    fn counts_are_conserved(
        prefilled in 0u64..5,
        ops in prop::collection::vec(any::<bool>(), 0..40),
    ) {
        let s = schema();
        let mut cache = PlanCache::new(s.clone());
        let (a, b) = (PlanKind::GoGrasp, PlanKind::PutInto);
        if prefilled > 0 {
            cache.prefill([PrefillTransition {
                from: a, to: b, count: prefilled, range: MetadataRange::point(&[1, 1, 1]),
            }]).unwrap();
        }
        let mut expect = prefilled as i64;
        for up in ops {
            if up {
                cache.reinforce(a, b, &sv(&s, &[2, 2, 2])).unwrap();
                expect += 1;
            } else {
                let exists = cache.entry(a, b).is_some();
                cache.penalize(a, b);
                if exists {
                    expect = (expect - 1).max(0);
                }
            }
        }
        let got = cache.entry(a, b).map_or(0, |e| e.count as i64);
        prop_assert_eq!(got, expect);
    }

    #[test]
    fn importance_stays_in_unit_interval(ops in prop::collection::vec(op(), 0..80)) {
        let s = schema();
        let mut cache = PlanCache::new(s.clone());
        for op in ops {
            match op {
                Op::Reinforce(a, b, v) => cache.reinforce(a, b, &sv(&s, &v)).unwrap(),
                Op::Penalize(a, b) => cache.penalize(a, b),
                Op::Select(p, v) => { cache.select(p, &sv(&s, &v)).unwrap(); }
            }
            for k in PlanKind::ALL {
                let i = cache.importance(k);
                prop_assert!(i.numer() > 0 && i.numer() <= i.denom());
            }
        }
    }

    #[test]
    fn size_bytes_follows_field_widths(
        widths in prop::collection::vec(any::<bool>(), 1..8),
        n in 0usize..36,
    ) {
        let fields: Vec<FieldSpec> = widths.iter().enumerate().map(|(i, &bin)| FieldSpec {
            name: format!("f{i}"),
            width: if bin { FieldWidth::Binary } else { FieldWidth::Numeric },
        }).collect();
        let s = Arc::new(FieldSchema::new(fields).unwrap());
        let mut cache = PlanCache::new(s.clone());
        let zeros = vec![0; widths.len()];
        for key in (0..36u8).take(n) {
            let from = PlanKind::from_code(key / 6).unwrap();
            let to = PlanKind::from_code(key % 6).unwrap();
            cache.reinforce(from, to, &sv(&s, &zeros)).unwrap();
        }
        let per_field: usize = widths.iter().map(|&b| if b { 1 } else { 4 }).sum();
        prop_assert_eq!(cache.size_bytes(), n * (4 + per_field));
    }

    #[test]
    fn cache_text_round_trips(steps in prop::collection::vec((kind(), kind(), values()), 0..40)) {
        let s = schema();
        let mut cache = PlanCache::new(s.clone());
        for (a, b, v) in steps {
            cache.reinforce(a, b, &sv(&s, &v)).unwrap();
        }
        let back = PlanCache::deserialize(&cache.serialize()).unwrap();
        prop_assert_eq!(back.serialize(), cache.serialize());
        prop_assert_eq!(back.entries().collect::<Vec<_>>(), cache.entries().collect::<Vec<_>>());
    }

    #[test]
    fn locality_rows_sum_to_one(seqs in prop::collection::vec(prop::collection::vec(kind(), 0..30), 0..6)) {
        let mut t = LocalityTable::default();
        for s in &seqs {
            t.add_sequence(s);
        }
        for (_, row) in t.rows() {
            let total: f64 = row.values().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn markov_samples_stay_on_support(p in 0.05f64..0.95, seed in any::<u64>()) {
        let chain = MarkovChain::transport_like(p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seq = chain.sample(PlanKind::Explore, 200, &mut rng);
        prop_assert_eq!(seq.len(), 201);
    }
}

// Grid, search and world properties. Episodes are costlier, so fewer cases.

fn bfs(layout: &Layout, a: Pos, b: Pos) -> Option<u32> {
    let (w, h) = (layout.width(), layout.height());
    let mut dist = vec![u32::MAX; w as usize * h as usize];
    let idx = |p: Pos| p.y as usize * w as usize + p.x as usize;
    let mut q = VecDeque::from([a]);
    dist[idx(a)] = 0;
    while let Some(p) = q.pop_front() {
        if p == b {
            return Some(dist[idx(p)]);
        }
        let nbrs = [
            (p.x as i32, p.y as i32 - 1),
            (p.x as i32 + 1, p.y as i32),
            (p.x as i32, p.y as i32 + 1),
            (p.x as i32 - 1, p.y as i32),
        ];
        for (x, y) in nbrs {
            if x < 0 || y < 0 || x >= w as i32 || y >= h as i32 {
                continue;
            }
            let n = Pos::new(x as u16, y as u16);
            if layout.is_walkable(n) && dist[idx(n)] == u32::MAX {
                dist[idx(n)] = dist[idx(p)] + 1;
                q.push_back(n);
            }
        }
    }
    None
}

fn grid() -> impl Strategy<Value = Vec<String>> {
    let cell = prop_oneof![3 => Just('.'), 2 => Just('#'), 1 => Just('0'), 1 => Just('1'), 1 => Just('2')];
    prop::collection::vec(prop::collection::vec(cell, 7), 7).prop_map(|mut rows| {
        rows[0][0] = '.';
        rows[6][6] = '.';
        rows.into_iter().map(|r| r.into_iter().collect()).collect()
    })
}

fn moves_of(mut inst: PlanInstance) -> u32 {
    let mut n = 0;
    while let Some(p) = inst.next_primitive() {
        if matches!(p, Primitive::Move(_)) {
            n += 1;
        }
    }
    n
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layout_paths_are_shortest(rows in grid(), ax in 0u16..7, ay in 0u16..7, bx in 0u16..7, by in 0u16..7) {
        let layout = Layout::parse(&rows, &[Pos::new(6, 6)]).unwrap();
        let (a, b) = (Pos::new(ax, ay), Pos::new(bx, by));
        prop_assume!(layout.is_walkable(a) && layout.is_walkable(b));
        let want = bfs(&layout, a, b);
        prop_assert_eq!(layout.distance(a, b), want);
        match layout.path(a, b) {
            Some(dirs) => {
                prop_assert_eq!(Some(dirs.len() as u32), want);
                let mut p = a;
                for d in dirs {
                    p = d.apply(p).unwrap();
                    prop_assert!(layout.is_walkable(p));
                }
                prop_assert_eq!(p, b);
            }
            None => prop_assert_eq!(want, None),
        }
    }

    #[test]
    fn compiled_moves_are_shortest(rows in grid()) {
        let json = serde_json::json!({
            "schema": "scenario v1", "name": "g", "layout": rows, "goal": [[6, 6]],
            "agents": [{"id": 0, "pos": [0, 0]}], "budget": 50,
        });
        let s = Scenario::from_json(&json.to_string()).unwrap();
        let w = World::new(&s, 0).unwrap();
        let view = w.view(0);
        let layout = Layout::parse(&s.layout, &[Pos::new(6, 6)]).unwrap();
        for room in 0..3 {
            if let Ok(inst) = compile(PlanId::with_target(PlanKind::GoTo, room), &view) {
                let end = inst.end_pos();
                prop_assert_eq!(layout.room_at(end), Some(room));
                prop_assert_eq!(Some(moves_of(inst)), bfs(&layout, view.pos, end));
            }
        }
    }

    #[test]
    fn world_conserves_objects(seed in 0u64..1000, acts in prop::collection::vec(0u32..14, 1..200)) {
        let s = common::scenario("small_5x5.json");
        let mut w = World::new(&s, seed).unwrap();
        let n = w.object_count();
        let ids: Vec<u32> = w.objects().iter().map(|o| o.id).collect();
        let mut delivered = 0;
        for a in acts {
            let id = ids[a as usize % ids.len()];
            let p = match a {
                0..=3 => Primitive::Move(Dir::ALL[a as usize]),
                4 => Primitive::Look,
                5 => Primitive::Reach,
                6 | 7 => Primitive::Grasp(id),
                8 => Primitive::Put(id),
                9 => Primitive::Deposit,
                10 => Primitive::Drop(id),
                11 => Primitive::Unput(id),
                12 => Primitive::Idle,
                _ => Primitive::Wait,
            };
            w.step(&[p]);
            prop_assert_eq!(w.object_count(), n);
            prop_assert_eq!(w.check_invariants(), Ok(()));
            prop_assert!(w.delivered() >= delivered);
            delivered = w.delivered();
        }
    }

    #[test]
    fn traces_round_trip(seed in 0u64..500, k in 0usize..4) {
        let s = common::scenario("small_5x5.json");
        let cfg = StrategyConfig { kind: StrategyKind::ALL[k], latency: plancache::planner::LatencyDist::Const(3), ..Default::default() };
        let t = run_episode(&s, seed, &cfg).unwrap();
        let text = t.to_jsonl();
        let back = Trace::from_jsonl(&text).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(back.to_jsonl(), text);
        common::check_trace_shape(&t);
    }
}
