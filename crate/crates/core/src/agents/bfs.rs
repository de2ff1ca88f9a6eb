use std::collections::VecDeque;

use thiserror::Error;

use crate::grid::{Cell, WallGrid};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("{0:?} is not a floor cell")]
    NotFloor(Cell),
    #[error("no path from {start:?} to {goal:?}")]
    NoPath { start: Cell, goal: Cell },
}

/// 4-connected floor path, start first, goal last.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanPath {
    pub cells: Vec<Cell>,
}

impl PlanPath {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn start(&self) -> Cell {
        self.cells[0]
    }

    pub fn goal(&self) -> Cell {
        *self.cells.last().expect("nonempty path")
    }
}

/// Shortest path by breadth-first search. Neighbours are expanded in the
/// order N, E, S, W, which fixes the choice among equal-length paths.
pub fn bfs_path(walls: &WallGrid, start: Cell, goal: Cell) -> Result<PlanPath, PlanError> {
    for c in [start, goal] {
        if walls.is_wall(c) {
            return Err(PlanError::NotFloor(c));
        }
    }
    let n = walls.size();
    let idx = |c: Cell| c.row as usize * n + c.col as usize;
    let mut parent: Vec<Option<Cell>> = vec![None; n * n];
    let mut seen = vec![false; n * n];
    seen[idx(start)] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(cell) = queue.pop_front() {
        if cell == goal {
            let mut cells = vec![goal];
            let mut cur = goal;
            while let Some(p) = parent[idx(cur)] {
                cells.push(p);
                cur = p;
            }
            cells.reverse();
            return Ok(PlanPath { cells });
        }
        for next in cell.neighbors() {
            if walls.is_floor(next) && !seen[idx(next)] {
                seen[idx(next)] = true;
                parent[idx(next)] = Some(cell);
                queue.push_back(next);
            }
        }
    }
    Err(PlanError::NoPath { start, goal })
}

/// Step distance from `start` to every cell (row-major), `None` if unreachable.
pub fn bfs_distances(walls: &WallGrid, start: Cell) -> Vec<Option<u32>> {
    let n = walls.size();
    let mut dist = vec![None; n * n];
    if walls.is_wall(start) {
        return dist;
    }
    dist[start.row as usize * n + start.col as usize] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(cell) = queue.pop_front() {
        let d = dist[cell.row as usize * n + cell.col as usize].unwrap();
        for next in cell.neighbors() {
            if walls.is_floor(next) {
                let slot = &mut dist[next.row as usize * n + next.col as usize];
                if slot.is_none() {
                    *slot = Some(d + 1);
                    queue.push_back(next);
                }
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corridor_path() {
        let g = WallGrid::from_ascii(&["#######", "#.....#", "#######", "#######", "#######", "#######", "#######"]);
        let p = bfs_path(&g, Cell::new(1, 1), Cell::new(1, 5)).unwrap();
        assert_eq!(p.len(), 5);
        assert_eq!(p.start(), Cell::new(1, 1));
        assert_eq!(p.goal(), Cell::new(1, 5));
    }

    #[test]
    fn start_is_goal() {
        let g = WallGrid::from_ascii(&["###", "#.#", "###"]);
        let p = bfs_path(&g, Cell::new(1, 1), Cell::new(1, 1)).unwrap();
        assert_eq!(p.cells, vec![Cell::new(1, 1)]);
    }

    #[test]
    fn unreachable_and_wall_endpoints() {
        let g = WallGrid::from_ascii(&["#####", "#.#.#", "#####", "#####", "#####"]);
        assert_eq!(
            bfs_path(&g, Cell::new(1, 1), Cell::new(1, 3)),
            Err(PlanError::NoPath { start: Cell::new(1, 1), goal: Cell::new(1, 3) })
        );
        assert_eq!(bfs_path(&g, Cell::new(0, 0), Cell::new(1, 3)), Err(PlanError::NotFloor(Cell::new(0, 0))));
    }

    #[test]
    fn ties_prefer_north_then_east() {
        // Open 2x2 block: from top-left to bottom-right, E is expanded
        // before S, so the path goes east first.
        let g = WallGrid::from_ascii(&["####", "#..#", "#..#", "####"]);
        let p = bfs_path(&g, Cell::new(1, 1), Cell::new(2, 2)).unwrap();
        assert_eq!(p.cells, vec![Cell::new(1, 1), Cell::new(1, 2), Cell::new(2, 2)]);
    }
}
