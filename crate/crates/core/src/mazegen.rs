//! Procedural maze layouts: rooms joined by a corridor tree.
//!
//! The walkable interior of side `N` is overlaid with a lattice of "nodes"
//! at odd full-grid coordinates. Rooms cover rectangular blocks of nodes
//! (a room of side `s` spans `(s + 1) / 2` nodes). Every node not inside a
//! room is a corridor junction. A random spanning tree over the nodes, with
//! each room contracted to a single vertex, opens the wall cells between
//! nodes, so the result is connected by construction.

use std::f64::consts::TAU;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::MazeConfig;
use crate::grid::{connectivity_check, Cell, WallGrid};
use crate::rng::{rng_from_seed, MazeRng};

/// Object colors, assigned in order.
pub const PALETTE: [[u8; 3]; 6] =
    [[255, 0, 0], [0, 255, 0], [0, 0, 255], [255, 255, 0], [255, 0, 255], [0, 255, 255]];

const MAX_ATTEMPTS: usize = 500;

#[derive(Debug, Error, PartialEq)]
pub enum MazeError {
    #[error("invalid maze config: {0}")]
    InvalidConfig(String),
    #[error("no valid layout found in {attempts} attempts")]
    GenerationFailed { attempts: usize },
}

/// Axis-aligned room in full-grid cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Room {
    pub row: i32,
    pub col: i32,
    pub height: i32,
    pub width: i32,
}

impl Room {
    pub fn contains(&self, cell: Cell) -> bool {
        cell.row >= self.row && cell.row < self.row + self.height && cell.col >= self.col && cell.col < self.col + self.width
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (self.row..self.row + self.height).flat_map(move |r| (self.col..self.col + self.width).map(move |c| Cell::new(r, c)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MazeLayout {
    /// `(N + 2) x (N + 2)` grid including the border ring.
    pub walls: WallGrid,
    pub rooms: Vec<Room>,
    pub object_cells: Vec<Cell>,
    pub object_colors: Vec<[u8; 3]>,
    pub spawn_cell: Cell,
    /// Radians, measured from +x towards +y.
    pub spawn_heading: f64,
}

impl MazeLayout {
    /// Side of the walkable interior (`N`).
    pub fn interior_size(&self) -> usize {
        self.walls.size() - 2
    }

    /// Interior `N x N` wall mask, row-major, 1 = wall.
    pub fn maze_layout(&self) -> Vec<u8> {
        self.walls.interior().as_slice().iter().map(|&w| w as u8).collect()
    }

    pub fn n_objects(&self) -> usize {
        self.object_cells.len()
    }

    /// Checks every layout invariant against `config`.
    pub fn validate(&self, config: &MazeConfig) -> Result<(), String> {
        let n = config.grid_size;
        if self.walls.size() != n + 2 {
            return Err(format!("wall grid is {0}x{0}, expected {1}x{1}", self.walls.size(), n + 2));
        }
        if !self.walls.boundary_is_wall() {
            return Err("border ring has a floor cell".into());
        }
        if !connectivity_check(&self.walls) {
            return Err("floor is not 4-connected".into());
        }
        if self.object_cells.len() != config.n_objects || self.object_colors.len() != config.n_objects {
            return Err(format!("expected {} objects, found {}", config.n_objects, self.object_cells.len()));
        }
        for (i, &cell) in self.object_cells.iter().enumerate() {
            if self.walls.is_wall(cell) {
                return Err(format!("object {i} at {cell:?} is inside a wall"));
            }
            if self.object_cells[..i].contains(&cell) {
                return Err(format!("object {i} shares cell {cell:?}"));
            }
        }
        if self.walls.is_wall(self.spawn_cell) {
            return Err("spawn cell is a wall".into());
        }
        if !config.room_count.contains(self.rooms.len()) {
            return Err(format!("{} rooms outside {:?}", self.rooms.len(), config.room_count));
        }
        for room in &self.rooms {
            if !config.room_size.contains(room.height as usize) || !config.room_size.contains(room.width as usize) {
                return Err(format!("room {room:?} side outside {:?}", config.room_size));
            }
            if room.cells().any(|c| self.walls.is_wall(c)) {
                return Err(format!("room {room:?} contains a wall"));
            }
        }
        if !(0.0..TAU).contains(&self.spawn_heading) {
            return Err(format!("spawn heading {} outside [0, 2pi)", self.spawn_heading));
        }
        Ok(())
    }

    /// Debug export: walls as 0/1 rows, objects as `[row, col, [r, g, b]]`.
    pub fn to_json(&self) -> serde_json::Value {
        let walls: Vec<Vec<u8>> = self.walls.rows().map(|r| r.iter().map(|&w| w as u8).collect()).collect();
        let objects: Vec<serde_json::Value> = self
            .object_cells
            .iter()
            .zip(&self.object_colors)
            .map(|(c, rgb)| serde_json::json!([c.row, c.col, rgb]))
            .collect();
        serde_json::json!({
            "walls": walls,
            "objects": objects,
            "rooms": self.rooms,
            "spawn": [self.spawn_cell.row, self.spawn_cell.col],
            "spawn_heading": self.spawn_heading,
        })
    }
}

impl MazeConfig {
    pub fn validate(&self) -> Result<(), MazeError> {
        let bad = |m: String| Err(MazeError::InvalidConfig(m));
        if self.grid_size < 3 || self.grid_size % 2 == 0 {
            return bad(format!("grid_size must be odd and >= 3, got {}", self.grid_size));
        }
        if self.n_objects == 0 || self.n_objects > PALETTE.len() {
            return bad(format!("n_objects must be in 1..={}, got {}", PALETTE.len(), self.n_objects));
        }
        if self.room_count.min > self.room_count.max || self.room_size.min > self.room_size.max {
            return bad("empty room range".into());
        }
        if room_sides(self).is_empty() {
            return bad(format!("room_size {:?} contains no odd side <= {}", self.room_size, self.grid_size));
        }
        if self.episode_length == 0 {
            return bad("episode_length must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.loop_probability) {
            return bad(format!("loop_probability must be in [0, 1], got {}", self.loop_probability));
        }
        Ok(())
    }
}

/// Odd room sides allowed by the config, in cells.
fn room_sides(config: &MazeConfig) -> Vec<usize> {
    (config.room_size.min.max(1)..=config.room_size.max.min(config.grid_size)).filter(|s| s % 2 == 1).collect()
}

/// Generates a layout. Identical `(config, seed)` always yields the same layout.
pub fn generate(config: &MazeConfig, seed: u64) -> Result<MazeLayout, MazeError> {
    config.validate()?;
    let mut rng = rng_from_seed(seed);
    for _ in 0..MAX_ATTEMPTS {
        if let Some(layout) = attempt(config, &mut rng) {
            debug_assert_eq!(layout.validate(config), Ok(()));
            return Ok(layout);
        }
    }
    Err(MazeError::GenerationFailed { attempts: MAX_ATTEMPTS })
}

/// Room as a block of lattice nodes.
#[derive(Clone, Copy)]
struct NodeRect {
    row: usize,
    col: usize,
    height: usize,
    width: usize,
}

fn attempt(config: &MazeConfig, rng: &mut MazeRng) -> Option<MazeLayout> {
    let nodes = (config.grid_size + 1) / 2;
    let spans: Vec<usize> = room_sides(config).iter().map(|s| (s + 1) / 2).collect();
    let target = rng.random_range(config.room_count.min..=config.room_count.max);

    let mut occupied = vec![false; nodes * nodes];
    let mut rects = Vec::with_capacity(target);
    while rects.len() < target {
        let mut shapes: Vec<(usize, usize)> = spans.iter().flat_map(|&h| spans.iter().map(move |&w| (h, w))).collect();
        shapes.shuffle(rng);
        let slots = shapes.iter().find_map(|&(h, w)| {
            let free = free_slots(&occupied, nodes, h, w);
            (!free.is_empty()).then_some(free)
        })?;
        let rect = *slots.choose(rng)?;
        for r in rect.row..rect.row + rect.height {
            for c in rect.col..rect.col + rect.width {
                occupied[r * nodes + c] = true;
            }
        }
        rects.push(rect);
    }

    let side = config.grid_size + 2;
    let mut walls = WallGrid::filled(side, true);
    let node_cell = |r: usize, c: usize| Cell::new(2 * r as i32 + 1, 2 * c as i32 + 1);
    for r in 0..nodes {
        for c in 0..nodes {
            walls.set(node_cell(r, c), false);
        }
    }

    let mut sets = DisjointSet::new(nodes * nodes);
    let mut rooms = Vec::with_capacity(rects.len());
    for rect in &rects {
        let room = Room {
            row: 2 * rect.row as i32 + 1,
            col: 2 * rect.col as i32 + 1,
            height: 2 * rect.height as i32 - 1,
            width: 2 * rect.width as i32 - 1,
        };
        for cell in room.cells() {
            walls.set(cell, false);
        }
        let anchor = rect.row * nodes + rect.col;
        for r in rect.row..rect.row + rect.height {
            for c in rect.col..rect.col + rect.width {
                sets.union(anchor, r * nodes + c);
            }
        }
        rooms.push(room);
    }

    let mut edges = Vec::with_capacity(2 * nodes * nodes);
    for r in 0..nodes {
        for c in 0..nodes {
            if c + 1 < nodes {
                edges.push((r * nodes + c, r * nodes + c + 1, Cell::new(2 * r as i32 + 1, 2 * c as i32 + 2)));
            }
            if r + 1 < nodes {
                edges.push((r * nodes + c, (r + 1) * nodes + c, Cell::new(2 * r as i32 + 2, 2 * c as i32 + 1)));
            }
        }
    }
    edges.shuffle(rng);
    for (a, b, between) in edges {
        if sets.union(a, b) || (walls.is_wall(between) && rng.random_bool(config.loop_probability)) {
            walls.set(between, false);
        }
    }

    let floor = walls.floor_cells();
    let spawn_cell = *floor.choose(rng)?;
    let spawn_heading = rng.random_range(0.0..TAU);
    let mut object_cells: Vec<Cell> = Vec::with_capacity(config.n_objects);
    for _ in 0..config.n_objects {
        let candidates: Vec<Cell> = floor
            .iter()
            .copied()
            .filter(|&c| c.chebyshev(spawn_cell) > 1 && object_cells.iter().all(|&o| c.chebyshev(o) > 1))
            .collect();
        object_cells.push(*candidates.choose(rng)?);
    }

    Some(MazeLayout {
        walls,
        rooms,
        object_colors: PALETTE[..config.n_objects].to_vec(),
        object_cells,
        spawn_cell,
        spawn_heading,
    })
}

fn free_slots(occupied: &[bool], nodes: usize, h: usize, w: usize) -> Vec<NodeRect> {
    let mut out = Vec::new();
    if h > nodes || w > nodes {
        return out;
    }
    for r in 0..=nodes - h {
        for c in 0..=nodes - w {
            let free = (r..r + h).all(|rr| (c..c + w).all(|cc| !occupied[rr * nodes + cc]));
            if free {
                out.push(NodeRect { row: r, col: c, height: h, width: w });
            }
        }
    }
    out
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}
