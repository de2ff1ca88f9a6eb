mod common;

use std::sync::Arc;

use memmaze::grid::{Cell, WallGrid};
use memmaze::mazegen::{generate, MazeLayout};
use memmaze::render::{cast_ray, render_top_down, Renderer, BORDER_PX, FRAME_SIZE, WALL_X_RGB, WALL_Y_RGB};
use memmaze::sim::{AgentPose, EnvState};
use memmaze::{CameraParams, Preset, SimParams};

struct Uniform(u64);

impl Uniform {
    fn next(&mut self) -> f64 {
        self.0 = memmaze::rng::mix64(self.0);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[test]
fn dda_matches_analytic_intersection() {
    let mut u = Uniform(3);
    let mut checked = 0;
    for seed in 0..50 {
        let preset = Preset::ALL[seed % 4];
        let walls = generate(&preset.config(), seed as u64).unwrap().walls;
        let floor = walls.floor_cells();
        for _ in 0..200 {
            let cell = floor[(u.next() * floor.len() as f64) as usize];
            let origin = [cell.col as f64 + u.next(), cell.row as f64 + u.next()];
            let a = u.next() * std::f64::consts::TAU;
            let dir = [a.cos(), a.sin()];
            let hit = cast_ray(&walls, origin, dir).unwrap();
            let (cell, t) = common::analytic_ray(&walls, origin, dir);
            assert_eq!(hit.cell, cell, "origin {origin:?} dir {dir:?}");
            assert!((hit.t - t).abs() < 1e-9);
            checked += 1;
        }
    }
    assert_eq!(checked, 10_000);
}

/// 9x9 grid with a 7x7 open room; the single object sits in the west column.
fn open_room() -> Arc<MazeLayout> {
    let mut walls = WallGrid::filled(9, false);
    for i in 0..9 {
        for c in [Cell::new(0, i), Cell::new(8, i), Cell::new(i, 0), Cell::new(i, 8)] {
            walls.set(c, true);
        }
    }
    Arc::new(MazeLayout {
        walls,
        rooms: vec![],
        object_cells: vec![Cell::new(4, 1)],
        object_colors: vec![[255, 0, 0]],
        spawn_cell: Cell::new(4, 4),
        spawn_heading: 0.0,
    })
}

#[test]
fn wall_slices_match_closed_form_projection() {
    let camera = CameraParams::default();
    let tan = camera.half_fov_tan();
    let mut renderer = Renderer::new(camera.clone());
    let mut u = Uniform(11);
    let layout = open_room();
    let mut columns = 0;
    for _ in 0..100 {
        let pos = [2.5 + 5.0 * u.next(), 1.5 + 6.0 * u.next()];
        let angle = (u.next() - 0.5) * 0.8;
        let mut env = EnvState::with_layout(layout.clone(), SimParams::default(), 10, 0);
        env.set_pose(AgentPose::new(pos, angle));
        let frame = renderer.render(&env).clone();
        let (h, r) = ([angle.cos(), angle.sin()], [-angle.sin(), angle.cos()]);
        for col in BORDER_PX..FRAME_SIZE - BORDER_PX {
            let k = (2.0 * (col as f64 + 0.5) / FRAME_SIZE as f64 - 1.0) * tan;
            let dir = [h[0] + r[0] * k, h[1] + r[1] * k];
            // East wall face x = 8: distance along the ray in camera-plane units.
            let t = (8.0 - pos[0]) / dir[0];
            let y = pos[1] + t * dir[1];
            if !(1.05..7.95).contains(&y) {
                continue;
            }
            let height = FRAME_SIZE as f64 / (2.0 * t * tan);
            let (top, bottom) = (32.0 - height / 2.0, 32.0 + height / 2.0);
            let expected = (BORDER_PX..FRAME_SIZE - BORDER_PX).filter(|&row| (top..bottom).contains(&(row as f64 + 0.5))).count();
            let got = (BORDER_PX..FRAME_SIZE - BORDER_PX).filter(|&row| matches!(frame.pixel(row, col), WALL_X_RGB | WALL_Y_RGB)).count();
            assert!(got.abs_diff(expected) <= 1, "pos {pos:?} angle {angle} col {col}: {got} vs {expected}");
            columns += 1;
        }
    }
    assert!(columns > 3000, "only {columns} columns checked");
}

#[test]
fn identical_state_renders_identical_frame() {
    let env = EnvState::reset(&memmaze::EnvConfig::preset(Preset::Maze15x15), 4).unwrap();
    let mut a = Renderer::default();
    let first = a.render(&env).clone();
    for _ in 0..3 {
        assert_eq!(a.render(&env), &first);
    }
    assert_eq!(Renderer::default().render(&env), &first);
}

#[test]
fn top_down_marker_sits_at_scaled_position() {
    let layout = open_room();
    let mut env = EnvState::with_layout(layout, SimParams::default(), 10, 0);
    let scale = 12;
    let mut u = Uniform(5);
    for _ in 0..50 {
        let pos = [2.0 + 5.0 * u.next(), 2.0 + 5.0 * u.next()];
        env.set_pose(AgentPose::new(pos, u.next() * 6.0));
        let img = render_top_down(&env, scale);
        let marker = memmaze::render::TopDownStyle::default().agent;
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for (x, y, p) in img.enumerate_pixels() {
            if p.0 == marker {
                sx += x as f64 + 0.5;
                sy += y as f64 + 0.5;
                n += 1.0;
            }
        }
        assert!(n > 0.0);
        let (cx, cy) = (sx / n, sy / n);
        let (ex, ey) = (pos[0] * scale as f64, pos[1] * scale as f64);
        assert!((cx - ex).abs() <= 1.0 && (cy - ey).abs() <= 1.0, "marker at ({cx}, {cy}), expected ({ex}, {ey})");
    }
}
