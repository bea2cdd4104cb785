// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Reference greedy policy and the argument resolver for verb-level plans.

use super::compile::compile;
use super::world::{AgentView, KnownObject, ObjectKind};
use crate::plan::{PlanId, PlanKind};

/// Extra ticks kept in hand when deciding to head for the goal before the budget runs out.
pub const BUDGET_MARGIN: u64 = 2;

/// Currently executing plan and how many primitives it has left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Ongoing {
    pub plan: PlanId,
    pub remaining: u32,
}

/// A plan nearly done is kept as long as it still compiles. Wait is never kept.
pub const KEEP_REMAINING: u32 = 2;

fn nearest<'a>(view: &AgentView, it: impl Iterator<Item = &'a KnownObject>) -> Option<&'a KnownObject> {
    it.filter_map(|k| view.distance_to(k.pos).map(|d| (d, k.id, k)))
        .min_by_key(|&(d, id, _)| (d, id))
        .map(|(_, _, k)| k)
}

/// The object the policy would pick up next, if any.
pub fn grasp_choice(view: &AgentView) -> Option<&KnownObject> {
    if view.free_hands() == 0 {
        return None;
    }
    if view.hands.is_empty() && view.unclaimed_targets >= 2 {
        if let Some(c) = nearest(view, view.known_of(ObjectKind::Container)) {
            return Some(c);
        }
    }
    nearest(view, view.known_of(ObjectKind::Target))
}

/// Room the policy would explore next: the lowest unvisited room assigned to
/// this agent by id parity, then any unvisited room, then the least recently
/// visited one.
pub fn explore_choice(view: &AgentView) -> Option<u32> {
    let n = view.n_agents.max(1);
    let mine = view.unvisited_rooms().find(|r| r % n == view.agent_id % n);
    mine.or_else(|| view.unvisited_rooms().next()).or_else(|| {
        view.visited.iter().min_by_key(|&&(r, t)| (t, r)).map(|&(r, _)| r)
    })
}

fn budget_pressure(view: &AgentView) -> bool {
    let Some((_, d)) = view.layout.nearest_goal(view.pos) else { return false };
    view.remaining_ticks() <= d as u64 + view.durations.deposit as u64 + BUDGET_MARGIN
}

fn approach(view: &AgentView, obj: &KnownObject) -> PlanId {
    match obj.room {
        Some(r) if view.room != Some(r) => PlanId::with_target(PlanKind::GoTo, r),
        _ => PlanId::with_target(PlanKind::GoGrasp, obj.id),
    }
}

/// The plan a fully informed, zero-latency planner would want running now.
pub fn reference_plan(view: &AgentView, ongoing: Option<&Ongoing>) -> PlanId {
    if let Some(o) = ongoing {
        if o.plan.kind() != PlanKind::Wait && o.remaining <= KEEP_REMAINING && compile(o.plan, view).is_ok() {
            return o.plan;
        }
    }
    if view.finished >= view.total_targets {
        return PlanId::wait();
    }
    let carried = view.carried();
    if view.container_with_space().is_some() {
        if let Some(h) = view.hand_targets().next() {
            return PlanId::with_target(PlanKind::PutInto, h.id);
        }
    }
    let container_full = view.container().is_some() && view.container_with_space().is_none();
    if carried > 0 && (view.free_hands() == 0 || container_full || budget_pressure(view)) {
        return PlanId::transport();
    }
    if let Some(obj) = grasp_choice(view) {
        return approach(view, obj);
    }
    let unvisited = view.unvisited_rooms().next().is_some();
    if carried > 0 && !unvisited {
        return PlanId::transport();
    }
    if unvisited || view.unclaimed_targets > 0 {
        if let Some(r) = explore_choice(view) {
            return PlanId::with_target(PlanKind::Explore, r);
        }
    }
    PlanId::wait()
}

/// Binds a verb predicted by the cache to the argument the policy would use.
pub fn resolve(kind: PlanKind, view: &AgentView) -> Option<PlanId> {
    match kind {
        PlanKind::Explore => explore_choice(view).map(|r| PlanId::with_target(kind, r)),
        PlanKind::GoTo => grasp_choice(view)
            .and_then(|o| o.room)
            .filter(|&r| view.room != Some(r))
            .map(|r| PlanId::with_target(kind, r)),
        PlanKind::GoGrasp => grasp_choice(view).map(|o| PlanId::with_target(kind, o.id)),
        PlanKind::PutInto => view.hand_targets().next().map(|h| PlanId::with_target(kind, h.id)),
        PlanKind::Transport => Some(PlanId::transport()),
        PlanKind::Wait => Some(PlanId::wait()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::scenario::Scenario;
    use crate::env::world::{Primitive, World};

    fn world(objects: &str, agent: [u16; 2]) -> World {
        let s = Scenario::from_json(&format!(
            r##"{{"schema": "scenario v1", "name": "t",
                 "layout": ["00.11", "00.11", "#...#", "22.33"],
                 "goal": [[0, 3]], "agents": [{{"id": 0, "pos": [{}, {}]}}], "objects": {objects}, "budget": 100}}"##,
            agent[0], agent[1]
        ))
        .unwrap();
        World::new(&s, 0).unwrap()
    }

    #[test]
    fn empty_view_explores_lowest_unvisited() {
        let w = world(r#"[{"id": 1, "kind": "target", "pos": [4, 0]}]"#, [2, 2]);
        assert_eq!(reference_plan(&w.view(0), None), PlanId::with_target(PlanKind::Explore, 0));
    }

    #[test]
    fn goes_to_room_then_grasps() {
        let w = world(r#"[{"id": 1, "kind": "target", "pos": [4, 0]}]"#, [1, 1]);
        let mut w = w;
        // Walk into room 1 so the target becomes known.
        for _ in 0..3 {
            let inst = crate::env::compile::compile(PlanId::with_target(PlanKind::GoTo, 1), &w.view(0)).unwrap();
            let p = inst.peek().unwrap();
            w.step(&[p]);
        }
        assert_eq!(w.view(0).room, Some(1));
        assert_eq!(reference_plan(&w.view(0), None), PlanId::with_target(PlanKind::GoGrasp, 1));
    }

    #[test]
    fn full_container_is_transported() {
        let objs = r#"[{"id": 1, "kind": "target", "pos": [1, 1]}, {"id": 2, "kind": "target", "pos": [1, 1]},
                       {"id": 3, "kind": "target", "pos": [1, 1]}, {"id": 9, "kind": "container", "pos": [1, 1]}]"#;
        let mut w = world(objs, [1, 1]);
        w.step(&[Primitive::Grasp(9)]);
        for id in 1..=3 {
            w.step(&[Primitive::Grasp(id)]);
            assert_eq!(reference_plan(&w.view(0), None), PlanId::with_target(PlanKind::PutInto, id));
            w.step(&[Primitive::Put(id)]);
        }
        assert_eq!(reference_plan(&w.view(0), None), PlanId::transport());
    }

    #[test]
    fn resolver_matches_policy_arguments() {
        let objs = r#"[{"id": 1, "kind": "target", "pos": [0, 0]}, {"id": 2, "kind": "target", "pos": [1, 1]}]"#;
        let w = world(objs, [1, 1]);
        let v = w.view(0);
        assert_eq!(resolve(PlanKind::GoGrasp, &v), Some(PlanId::with_target(PlanKind::GoGrasp, 2)));
        assert_eq!(resolve(PlanKind::GoTo, &v), None);
        assert_eq!(resolve(PlanKind::PutInto, &v), None);
        assert_eq!(resolve(PlanKind::Explore, &v), Some(PlanId::with_target(PlanKind::Explore, 1)));
    }
}
