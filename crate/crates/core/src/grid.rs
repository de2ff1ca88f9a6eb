//! Square wall grids and grid cells.
//!
//! World coordinates put cell `(row, col)` at `x in [col, col+1)`,
//! `y in [row, row+1)`; the y axis points down the rows.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: i32,
    pub col: i32,
}

impl Cell {
    pub const fn new(row: i32, col: i32) -> Self {
        Cell { row, col }
    }

    /// Cell containing the world point `(x, y)`.
    pub fn containing(x: f64, y: f64) -> Self {
        Cell::new(y.floor() as i32, x.floor() as i32)
    }

    pub fn center(self) -> (f64, f64) {
        (self.col as f64 + 0.5, self.row as f64 + 0.5)
    }

    /// 4-neighbours in the fixed order N, E, S, W.
    pub fn neighbors(self) -> [Cell; 4] {
        [
            Cell::new(self.row - 1, self.col),
            Cell::new(self.row, self.col + 1),
            Cell::new(self.row + 1, self.col),
            Cell::new(self.row, self.col - 1),
        ]
    }

    pub fn chebyshev(self, other: Cell) -> i32 {
        (self.row - other.row).abs().max((self.col - other.col).abs())
    }

    pub fn manhattan(self, other: Cell) -> i32 {
        (self.row - other.row).abs() + (self.col - other.col).abs()
    }
}

/// Square occupancy grid, `true` = wall. Cells outside the grid read as wall.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WallGrid {
    size: usize,
    cells: Vec<bool>,
}

impl WallGrid {
    pub fn filled(size: usize, wall: bool) -> Self {
        WallGrid { size, cells: vec![wall; size * size] }
    }

    /// Parses rows of `#` (wall) and `.` (floor). Panics on ragged input.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let size = rows.len();
        let mut grid = WallGrid::filled(size, true);
        for (r, line) in rows.iter().enumerate() {
            assert_eq!(line.chars().count(), size, "grid must be square");
            for (c, ch) in line.chars().enumerate() {
                grid.cells[r * size + c] = ch != '.';
            }
        }
        grid
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Self {
        let size = rows.len();
        assert!(rows.iter().all(|r| r.len() == size), "grid must be square");
        WallGrid { size, cells: rows.concat() }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row >= 0 && cell.col >= 0 && (cell.row as usize) < self.size && (cell.col as usize) < self.size
    }

    pub fn is_wall(&self, cell: Cell) -> bool {
        !self.contains(cell) || self.cells[cell.row as usize * self.size + cell.col as usize]
    }

    pub fn is_floor(&self, cell: Cell) -> bool {
        !self.is_wall(cell)
    }

    pub fn set(&mut self, cell: Cell, wall: bool) {
        assert!(self.contains(cell), "cell {cell:?} outside {}x{} grid", self.size, self.size);
        self.cells[cell.row as usize * self.size + cell.col as usize] = wall;
    }

    /// Floor cells in row-major order.
    pub fn floor_cells(&self) -> Vec<Cell> {
        let n = self.size as i32;
        (0..n)
            .flat_map(|r| (0..n).map(move |c| Cell::new(r, c)))
            .filter(|&c| self.is_floor(c))
            .collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[bool]> {
        self.cells.chunks(self.size)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.cells
    }

    pub fn boundary_is_wall(&self) -> bool {
        let n = self.size as i32;
        (0..n).all(|i| {
            self.is_wall(Cell::new(0, i))
                && self.is_wall(Cell::new(n - 1, i))
                && self.is_wall(Cell::new(i, 0))
                && self.is_wall(Cell::new(i, n - 1))
        })
    }

    /// Sub-grid with the outer ring removed.
    pub fn interior(&self) -> WallGrid {
        assert!(self.size >= 2);
        let n = self.size - 2;
        let mut out = WallGrid::filled(n, true);
        for r in 0..n {
            for c in 0..n {
                out.cells[r * n + c] = self.cells[(r + 1) * self.size + c + 1];
            }
        }
        out
    }

    pub fn to_ascii(&self) -> String {
        self.rows()
            .map(|row| row.iter().map(|&w| if w { '#' } else { '.' }).collect::<String>())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// True iff all floor cells form one 4-connected component.
///
/// A grid without floor cells is vacuously connected.
pub fn connectivity_check(walls: &WallGrid) -> bool {
    let floor = walls.floor_cells();
    let Some(&start) = floor.first() else {
        return true;
    };
    let n = walls.size();
    let mut seen = vec![false; n * n];
    let mut queue = VecDeque::from([start]);
    seen[start.row as usize * n + start.col as usize] = true;
    let mut reached = 1;
    while let Some(cell) = queue.pop_front() {
        for next in cell.neighbors() {
            if walls.is_floor(next) {
                let idx = next.row as usize * n + next.col as usize;
                if !seen[idx] {
                    seen[idx] = true;
                    reached += 1;
                    queue.push_back(next);
                }
            }
        }
    }
    reached == floor.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_center_cell_is_connected() {
        let g = WallGrid::from_ascii(&["###", "#.#", "###"]);
        assert!(connectivity_check(&g));
    }

    #[test]
    fn separated_cells_are_not_connected() {
        let g = WallGrid::from_ascii(&["#####", "#.#.#", "#####", "#####", "#####"]);
        assert!(!connectivity_check(&g));
    }

    #[test]
    fn all_wall_is_vacuously_connected() {
        assert!(connectivity_check(&WallGrid::filled(5, true)));
    }

    #[test]
    fn diagonal_contact_does_not_connect() {
        let g = WallGrid::from_ascii(&["#####", "#.###", "##.##", "#####", "#####"]);
        assert!(!connectivity_check(&g));
    }

    #[test]
    fn out_of_bounds_reads_as_wall() {
        let g = WallGrid::filled(3, false);
        assert!(g.is_wall(Cell::new(-1, 0)));
        assert!(g.is_wall(Cell::new(0, 3)));
        assert!(g.is_floor(Cell::new(2, 2)));
    }

    #[test]
    fn interior_strips_ring() {
        let g = WallGrid::from_ascii(&["####", "#..#", "#.##", "####"]);
        assert_eq!(g.interior().to_ascii(), "..\n.#");
    }
}
