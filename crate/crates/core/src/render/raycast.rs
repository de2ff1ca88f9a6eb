//! Grid ray traversal (DDA).

use crate::grid::{Cell, WallGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HitSide {
    /// Ray crossed a vertical grid line (`x = const`).
    X,
    /// Ray crossed a horizontal grid line (`y = const`).
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub cell: Cell,
    pub side: HitSide,
    /// Ray parameter at the hit: the hit point is `origin + t * dir`.
    /// For camera rays built as `view + plane * k` this is the
    /// perpendicular distance to the camera plane.
    pub t: f64,
}

/// Walks the cells along `origin + t * dir` until the first wall cell.
///
/// Returns `None` only for a zero direction. Cells outside the grid are
/// walls, so every other ray terminates.
pub fn cast_ray(walls: &WallGrid, origin: [f64; 2], dir: [f64; 2]) -> Option<RayHit> {
    cast_ray_visit(walls, origin, dir, |_| {})
}

/// Like [`cast_ray`], calling `visit` on every floor cell passed through.
pub(crate) fn cast_ray_visit(
    walls: &WallGrid,
    origin: [f64; 2],
    dir: [f64; 2],
    mut visit: impl FnMut(Cell),
) -> Option<RayHit> {
    if dir[0] == 0.0 && dir[1] == 0.0 {
        return None;
    }
    let mut cell = Cell::containing(origin[0], origin[1]);
    if walls.is_wall(cell) {
        return Some(RayHit { cell, side: HitSide::X, t: 0.0 });
    }
    visit(cell);
    let delta = [1.0 / dir[0].abs(), 1.0 / dir[1].abs()];
    let (step_x, mut side_x) = if dir[0] < 0.0 {
        (-1, (origin[0] - cell.col as f64) * delta[0])
    } else {
        (1, (cell.col as f64 + 1.0 - origin[0]) * delta[0])
    };
    let (step_y, mut side_y) = if dir[1] < 0.0 {
        (-1, (origin[1] - cell.row as f64) * delta[1])
    } else {
        (1, (cell.row as f64 + 1.0 - origin[1]) * delta[1])
    };
    let limit = 4 * walls.size() + 8;
    for _ in 0..limit {
        let (side, t);
        if side_x < side_y {
            t = side_x;
            side_x += delta[0];
            cell.col += step_x;
            side = HitSide::X;
        } else {
            t = side_y;
            side_y += delta[1];
            cell.row += step_y;
            side = HitSide::Y;
        }
        if walls.is_wall(cell) {
            return Some(RayHit { cell, side, t });
        }
        visit(cell);
    }
    unreachable!("ray left a grid whose outside reads as wall")
}

/// Floor cells crossed by any camera ray plus the wall cells they hit,
/// as a row-major mask over the full grid.
pub fn visible_cells(walls: &WallGrid, origin: [f64; 2], heading: [f64; 2], half_fov_tan: f64, rays: usize) -> Vec<bool> {
    let n = walls.size();
    let mut mask = vec![false; n * n];
    let right = [-heading[1], heading[0]];
    let mut mark = |c: Cell| {
        if walls.contains(c) {
            mask[c.row as usize * n + c.col as usize] = true;
        }
    };
    for i in 0..rays {
        let k = (2.0 * (i as f64 + 0.5) / rays as f64 - 1.0) * half_fov_tan;
        let dir = [heading[0] + right[0] * k, heading[1] + right[1] * k];
        if let Some(hit) = cast_ray_visit(walls, origin, dir, &mut mark) {
            mark(hit.cell);
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_ray_hits_facing_wall() {
        let g = WallGrid::from_ascii(&["#####", "#...#", "#...#", "#...#", "#####"]);
        let hit = cast_ray(&g, [2.7, 2.5], [1.0, 0.0]).unwrap();
        assert_eq!(hit.cell, Cell::new(2, 4));
        assert_eq!(hit.side, HitSide::X);
        assert!((hit.t - 1.3).abs() < 1e-12);
        let hit = cast_ray(&g, [2.5, 2.5], [0.0, -1.0]).unwrap();
        assert_eq!(hit.cell, Cell::new(0, 2));
        assert_eq!(hit.side, HitSide::Y);
        assert!((hit.t - 1.5).abs() < 1e-12);
    }

    #[test]
    fn zero_direction_is_none() {
        let g = WallGrid::filled(3, true);
        assert!(cast_ray(&g, [1.5, 1.5], [0.0, 0.0]).is_none());
    }

    #[test]
    fn visibility_includes_hit_walls_and_own_cell() {
        let g = WallGrid::from_ascii(&["#####", "#...#", "#...#", "#...#", "#####"]);
        let mask = visible_cells(&g, [1.5, 2.5], [1.0, 0.0], 1.0, 64);
        assert!(mask[2 * 5 + 1]);
        assert!(mask[2 * 5 + 4]);
        // Directly behind the agent.
        assert!(!mask[2 * 5]);
    }
}
