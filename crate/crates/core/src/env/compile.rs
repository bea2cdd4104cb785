// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Plan compilation: a bound plan becomes a queue of one-tick primitives.
//!
//! Compilation reads only the agent's view, so a plan compiled from a stale
//! belief can still fail when executed.

use std::collections::VecDeque;

use super::layout::Pos;
use super::world::{AgentView, HeldItem, ObjectKind, Primitive, CONTAINER_CAPACITY};
use crate::plan::{PlanId, PlanKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NotExecutable {
    #[error("room {0} does not exist")]
    NoRoom(u32),
    #[error("object {0} is not known to be on the floor")]
    UnknownObject(u32),
    #[error("no free hand")]
    HandsFull,
    #[error("object {0} is not a target held in hand")]
    NotInHand(u32),
    #[error("no held container with free space")]
    NoContainerSpace,
    #[error("nothing to transport")]
    NothingCarried,
    #[error("destination is unreachable")]
    Unreachable,
}

/// A plan bound to a primitive queue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanInstance {
    plan: PlanId,
    queue: VecDeque<Primitive>,
    total: u32,
    /// Believed floor position of the object a grasp plan is heading for.
    expect: Option<(u32, Pos)>,
    end_pos: Pos,
}

impl PlanInstance {
    fn new(plan: PlanId, queue: Vec<Primitive>, expect: Option<(u32, Pos)>, end_pos: Pos) -> Self {
        debug_assert!(!queue.is_empty());
        PlanInstance { plan, total: queue.len() as u32, queue: queue.into(), expect, end_pos }
    }

    pub fn plan(&self) -> PlanId {
        self.plan
    }

    pub fn kind(&self) -> PlanKind {
        self.plan.kind()
    }

    /// Primitives not yet executed.
    pub fn remaining(&self) -> u32 {
        self.queue.len() as u32
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn is_done(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn peek(&self) -> Option<Primitive> {
        self.queue.front().copied()
    }

    pub fn next_primitive(&mut self) -> Option<Primitive> {
        self.queue.pop_front()
    }

    /// Where the agent stands once the queue is exhausted.
    pub fn end_pos(&self) -> Pos {
        self.end_pos
    }

    /// Whether the rest of the queue still makes sense under `view`.
    pub fn still_valid(&self, view: &AgentView) -> bool {
        if self.queue.is_empty() {
            return true;
        }
        match self.plan.kind() {
            PlanKind::GoGrasp => match self.expect {
                Some((id, pos)) => {
                    view.free_hands() > 0 && view.known_object(id).is_some_and(|k| k.pos == pos)
                }
                None => true,
            },
            PlanKind::PutInto => {
                let id = self.plan.target().expect("target");
                view.hand_targets().any(|h| h.id == id) && view.container_with_space().is_some()
            }
            PlanKind::Transport => view.carried() > 0,
            _ => true,
        }
    }
}

fn moves(view: &AgentView, to: Pos) -> Result<Vec<Primitive>, NotExecutable> {
    let dirs = view.layout.path(view.pos, to).ok_or(NotExecutable::Unreachable)?;
    Ok(dirs.into_iter().map(Primitive::Move).collect())
}

/// Closest cell of `room`; the agent sees the whole room from any of its cells.
fn entry_cell(view: &AgentView, room: u32) -> Result<Pos, NotExecutable> {
    let r = view.layout.room(room).ok_or(NotExecutable::NoRoom(room))?;
    r.cells
        .iter()
        .filter_map(|&c| view.distance_to(c).map(|d| (d, c)))
        .min()
        .map(|(_, c)| c)
        .ok_or(NotExecutable::Unreachable)
}

fn pad(queue: &mut Vec<Primitive>, filler: Primitive, ticks: u32) {
    queue.extend(std::iter::repeat_n(filler, ticks.saturating_sub(1) as usize));
}

/// Compiles `plan` against the agent's view.
pub fn compile(plan: PlanId, view: &AgentView) -> Result<PlanInstance, NotExecutable> {
    let d = view.durations;
    match plan.kind() {
        PlanKind::Explore => {
            let room = plan.target().expect("target");
            let (mut q, end) = if view.room == Some(room) {
                (Vec::new(), view.pos)
            } else {
                let to = entry_cell(view, room)?;
                (moves(view, to)?, to)
            };
            q.extend(std::iter::repeat_n(Primitive::Look, d.look.max(1) as usize));
            Ok(PlanInstance::new(plan, q, None, end))
        }
        PlanKind::GoTo => {
            let room = plan.target().expect("target");
            if view.room == Some(room) {
                return Ok(PlanInstance::new(plan, vec![Primitive::Idle], None, view.pos));
            }
            let to = entry_cell(view, room)?;
            let q = moves(view, to)?;
            Ok(PlanInstance::new(plan, q, None, to))
        }
        PlanKind::GoGrasp => {
            let id = plan.target().expect("target");
            let obj = view.known_object(id).ok_or(NotExecutable::UnknownObject(id))?;
            if view.free_hands() == 0 {
                return Err(NotExecutable::HandsFull);
            }
            let pos = obj.pos;
            let mut q = moves(view, pos)?;
            pad(&mut q, Primitive::Reach, d.grasp);
            q.push(Primitive::Grasp(id));
            Ok(PlanInstance::new(plan, q, Some((id, pos)), pos))
        }
        PlanKind::PutInto => {
            let id = plan.target().expect("target");
            if !view.hand_targets().any(|h| h.id == id) {
                return Err(NotExecutable::NotInHand(id));
            }
            if view.container_with_space().is_none() {
                return Err(NotExecutable::NoContainerSpace);
            }
            let mut q = Vec::new();
            pad(&mut q, Primitive::Idle, d.put);
            q.push(Primitive::Put(id));
            Ok(PlanInstance::new(plan, q, None, view.pos))
        }
        PlanKind::Transport => {
            if view.carried() == 0 {
                return Err(NotExecutable::NothingCarried);
            }
            let (goal, _) = view.layout.nearest_goal(view.pos).ok_or(NotExecutable::Unreachable)?;
            let mut q = moves(view, goal)?;
            pad(&mut q, Primitive::Idle, d.deposit);
            q.push(Primitive::Deposit);
            Ok(PlanInstance::new(plan, q, None, goal))
        }
        PlanKind::Wait => Ok(PlanInstance::new(plan, vec![Primitive::Wait], None, view.pos)),
    }
}

/// Every plan that compiles under `view`. Wait and Explore of every room are
/// always included.
pub fn legal_plans(view: &AgentView) -> Vec<PlanId> {
    let mut out = Vec::new();
    for r in view.layout.rooms() {
        out.push(PlanId::with_target(PlanKind::Explore, r.id));
    }
    for r in view.layout.rooms() {
        if view.room != Some(r.id) && entry_cell(view, r.id).is_ok() {
            out.push(PlanId::with_target(PlanKind::GoTo, r.id));
        }
    }
    if view.free_hands() > 0 {
        for k in &view.known {
            if view.distance_to(k.pos).is_some() {
                out.push(PlanId::with_target(PlanKind::GoGrasp, k.id));
            }
        }
    }
    if view.container_with_space().is_some() {
        for h in view.hand_targets() {
            out.push(PlanId::with_target(PlanKind::PutInto, h.id));
        }
    }
    if view.carried() > 0 {
        out.push(PlanId::transport());
    }
    out.push(PlanId::wait());
    out
}

/// The view the agent is expected to have once `inst` completes, assuming
/// nothing else in the world changes. Objects that would come into sight are
/// not predicted.
pub fn predict_after(view: &AgentView, inst: &PlanInstance) -> AgentView {
    let mut v = view.clone();
    v.tick += inst.remaining() as u64;
    v.pos = inst.end_pos();
    v.room = v.layout.room_at(v.pos);
    v.visible.clear();
    if let Some(r) = v.room {
        match v.visited.binary_search_by_key(&r, |&(id, _)| id) {
            Ok(i) => v.visited[i].1 = v.tick,
            Err(i) => v.visited.insert(i, (r, v.tick)),
        }
    }
    match inst.kind() {
        PlanKind::GoGrasp => {
            let id = inst.plan().target().expect("target");
            if let Some(i) = v.known.iter().position(|k| k.id == id) {
                let k = v.known.remove(i);
                if k.kind == ObjectKind::Target {
                    v.unclaimed_targets = v.unclaimed_targets.saturating_sub(1);
                }
                v.hands.push(HeldItem { id, kind: k.kind, contents: Vec::new() });
            }
        }
        PlanKind::PutInto => {
            let id = inst.plan().target().expect("target");
            let container = v
                .hands
                .iter()
                .position(|h| h.kind == ObjectKind::Container && h.contents.len() < CONTAINER_CAPACITY);
            if let (Some(i), Some(c)) = (v.hands.iter().position(|h| h.id == id), container) {
                v.hands[c].contents.push(id);
                v.hands.remove(i);
            }
        }
        PlanKind::Transport => {
            v.finished += v.carried();
            v.hands.retain(|h| h.kind == ObjectKind::Container && h.contents.is_empty());
        }
        _ => {}
    }
    v
}

/// A provisionally executed plan and where it started, kept so it can be undone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UndoRecord {
    pub plan: PlanId,
    pub start_pos: Pos,
    /// Cell where a grasp plan picked its object up.
    pub grasp_pos: Option<Pos>,
}

/// A corrective plan reverting `rec`: drop a grasped object where it was
/// picked up, take a put object back out, or walk back to the start cell.
/// Returns `None` when there is nothing left to revert.
pub fn compile_undo(rec: &UndoRecord, view: &AgentView) -> Option<PlanInstance> {
    let mut q = Vec::new();
    let mut end = view.pos;
    match rec.plan.kind() {
        PlanKind::GoGrasp => {
            let id = rec.plan.target().expect("target");
            if view.hands.iter().any(|h| h.id == id) {
                let at = rec.grasp_pos.unwrap_or(view.pos);
                if let Ok(m) = moves(view, at) {
                    q = m;
                    end = at;
                }
                q.push(Primitive::Drop(id));
            }
        }
        PlanKind::PutInto => {
            let id = rec.plan.target().expect("target");
            let inside = view.container().is_some_and(|c| c.contents.contains(&id));
            if inside && view.free_hands() > 0 {
                q.push(Primitive::Unput(id));
            }
        }
        PlanKind::Wait => {}
        _ => {
            if let Ok(m) = moves(view, rec.start_pos) {
                q = m;
                end = rec.start_pos;
            }
        }
    }
    (!q.is_empty()).then(|| PlanInstance::new(rec.plan, q, None, end))
}
