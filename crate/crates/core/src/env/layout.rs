// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Static grid geometry: walls, rooms, goal cells and shortest paths.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub x: u16,
    pub y: u16,
}

impl Pos {
    pub fn new(x: u16, y: u16) -> Self {
        Pos { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dir {
    North,
    East,
    South,
    West,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::North, Dir::East, Dir::South, Dir::West];

    pub fn apply(self, p: Pos) -> Option<Pos> {
        match self {
            Dir::North => p.y.checked_sub(1).map(|y| Pos::new(p.x, y)),
            Dir::East => Some(Pos::new(p.x + 1, p.y)),
            Dir::South => Some(Pos::new(p.x, p.y + 1)),
            Dir::West => p.x.checked_sub(1).map(|x| Pos::new(x, p.y)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Room {
    pub id: u32,
    pub cells: Vec<Pos>,
    /// Cell that Explore and GoTo navigate to.
    pub anchor: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LayoutError {
    #[error("layout is empty")]
    Empty,
    #[error("row {row} has width {got}, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("unknown layout character `{ch}` at ({x}, {y})")]
    BadChar { ch: char, x: usize, y: usize },
    #[error("cell ({x}, {y}) is outside the grid or not walkable")]
    BadCell { x: u16, y: u16 },
    #[error("no goal cells")]
    NoGoal,
}

/// Walkable grid with room membership and an all-pairs distance table.
#[derive(Debug, Clone)]
pub struct Layout {
    width: u16,
    height: u16,
    walkable: Vec<bool>,
    room_of: Vec<Option<u32>>,
    rooms: Vec<Room>,
    goal: Vec<Pos>,
    dist: Vec<u16>,
}

pub const UNREACHABLE: u16 = u16::MAX;

fn room_id(ch: char) -> Option<u32> {
    match ch {
        '0'..='9' => Some(ch as u32 - '0' as u32),
        'a'..='z' => Some(ch as u32 - 'a' as u32 + 10),
        _ => None,
    }
}

impl Layout {
    /// Builds a layout from ASCII rows: `#` is a wall, `.` a walkable corridor
    /// cell outside any room, and `0-9`/`a-z` a walkable cell of that room.
    pub fn parse(rows: &[String], goal: &[Pos]) -> Result<Self, LayoutError> {
        let height = rows.len();
        if height == 0 {
            return Err(LayoutError::Empty);
        }
        let width = rows[0].chars().count();
        let mut walkable = Vec::with_capacity(width * height);
        let mut room_of = Vec::with_capacity(width * height);
        for (y, row) in rows.iter().enumerate() {
            let got = row.chars().count();
            if got != width {
                return Err(LayoutError::Ragged { row: y, got, expected: width });
            }
            for (x, ch) in row.chars().enumerate() {
                match ch {
                    '#' => {
                        walkable.push(false);
                        room_of.push(None);
                    }
                    '.' => {
                        walkable.push(true);
                        room_of.push(None);
                    }
                    c => match room_id(c) {
                        Some(r) => {
                            walkable.push(true);
                            room_of.push(Some(r));
                        }
                        None => return Err(LayoutError::BadChar { ch, x, y }),
                    },
                }
            }
        }
        let mut layout = Layout {
            width: width as u16,
            height: height as u16,
            walkable,
            room_of,
            rooms: Vec::new(),
            goal: Vec::new(),
            dist: Vec::new(),
        };
        if goal.is_empty() {
            return Err(LayoutError::NoGoal);
        }
        for &g in goal {
            if !layout.is_walkable(g) {
                return Err(LayoutError::BadCell { x: g.x, y: g.y });
            }
        }
        layout.goal = goal.to_vec();
        layout.build_rooms();
        layout.build_distances();
        Ok(layout)
    }

    fn build_rooms(&mut self) {
        let mut ids: Vec<u32> = self.room_of.iter().flatten().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        for id in ids {
            let cells: Vec<Pos> = (0..self.walkable.len())
                .filter(|&i| self.room_of[i] == Some(id))
                .map(|i| self.pos_of(i))
                .collect();
            let n = cells.len() as f64;
            let cx = cells.iter().map(|p| p.x as f64).sum::<f64>() / n;
            let cy = cells.iter().map(|p| p.y as f64).sum::<f64>() / n;
            // Closest cell to the centroid; `cells` is in row-major order so
            // the first minimum is deterministic.
            let anchor = *cells
                .iter()
                .min_by(|a, b| {
                    let da = (a.x as f64 - cx).powi(2) + (a.y as f64 - cy).powi(2);
                    let db = (b.x as f64 - cx).powi(2) + (b.y as f64 - cy).powi(2);
                    da.partial_cmp(&db).expect("finite")
                })
                .expect("room has cells");
            self.rooms.push(Room { id, cells, anchor });
        }
    }

    fn build_distances(&mut self) {
        let n = self.walkable.len();
        self.dist = vec![UNREACHABLE; n * n];
        let mut queue = VecDeque::new();
        for src in 0..n {
            if !self.walkable[src] {
                continue;
            }
            let row = &mut self.dist[src * n..(src + 1) * n];
            row[src] = 0;
            queue.clear();
            queue.push_back(src);
            while let Some(cur) = queue.pop_front() {
                let d = row[cur];
                let p = Pos::new((cur % self.width as usize) as u16, (cur / self.width as usize) as u16);
                for dir in Dir::ALL {
                    if let Some(q) = dir.apply(p) {
                        if q.x < self.width && q.y < self.height {
                            let qi = q.y as usize * self.width as usize + q.x as usize;
                            if self.walkable[qi] && row[qi] == UNREACHABLE {
                                row[qi] = d + 1;
                                queue.push_back(qi);
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn in_bounds(&self, p: Pos) -> bool {
        p.x < self.width && p.y < self.height
    }

    fn index(&self, p: Pos) -> usize {
        p.y as usize * self.width as usize + p.x as usize
    }

    fn pos_of(&self, i: usize) -> Pos {
        Pos::new((i % self.width as usize) as u16, (i / self.width as usize) as u16)
    }

    pub fn is_walkable(&self, p: Pos) -> bool {
        self.in_bounds(p) && self.walkable[self.index(p)]
    }

    pub fn room_at(&self, p: Pos) -> Option<u32> {
        if self.in_bounds(p) {
            self.room_of[self.index(p)]
        } else {
            None
        }
    }

    pub fn rooms(&self) -> &[Room] {
        &self.rooms
    }

    pub fn room(&self, id: u32) -> Option<&Room> {
        self.rooms.iter().find(|r| r.id == id)
    }

    pub fn goal(&self) -> &[Pos] {
        &self.goal
    }

    pub fn is_goal(&self, p: Pos) -> bool {
        self.goal.contains(&p)
    }

    /// Room containing the first goal cell, if the goal lies inside a room.
    pub fn goal_room(&self) -> Option<u32> {
        self.goal.iter().find_map(|&g| self.room_at(g))
    }

    /// Every walkable cell that belongs to a room and is not a goal cell.
    pub fn room_cells_outside_goal(&self) -> Vec<Pos> {
        self.rooms
            .iter()
            .flat_map(|r| r.cells.iter().copied())
            .filter(|p| !self.is_goal(*p))
            .collect()
    }

    /// Shortest 4-connected path length, or `None` if unreachable.
    pub fn distance(&self, a: Pos, b: Pos) -> Option<u32> {
        if !self.is_walkable(a) || !self.is_walkable(b) {
            return None;
        }
        let n = self.walkable.len();
        match self.dist[self.index(a) * n + self.index(b)] {
            UNREACHABLE => None,
            d => Some(d as u32),
        }
    }

    /// Moves of one shortest path from `a` to `b`. Among equal-length paths the
    /// first direction in N, E, S, W order is taken at every step.
    pub fn path(&self, a: Pos, b: Pos) -> Option<Vec<Dir>> {
        let mut remaining = self.distance(a, b)?;
        let mut cur = a;
        let mut moves = Vec::with_capacity(remaining as usize);
        while remaining > 0 {
            let (dir, next) = Dir::ALL
                .iter()
                .filter_map(|&d| d.apply(cur).map(|q| (d, q)))
                .find(|&(_, q)| self.distance(q, b) == Some(remaining - 1))
                .expect("distance table is consistent");
            moves.push(dir);
            cur = next;
            remaining -= 1;
        }
        Some(moves)
    }

    /// Nearest goal cell from `from` (ties by goal list order).
    pub fn nearest_goal(&self, from: Pos) -> Option<(Pos, u32)> {
        self.goal
            .iter()
            .filter_map(|&g| self.distance(from, g).map(|d| (g, d)))
            .min_by_key(|&(_, d)| d)
    }
}
