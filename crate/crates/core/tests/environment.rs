mod common;

use std::collections::HashSet;

use memmaze::grid::Cell;
use memmaze::mazegen::{generate, MazeLayout};
use memmaze::sim::{Action, AgentPose, EnvState};
use memmaze::{EnvConfig, MazeConfig, Preset};
use proptest::prelude::*;

/// Layout invariants checked without the generator's own validator.
fn check_layout(layout: &MazeLayout, config: &MazeConfig) -> Result<(), String> {
    let walls = &layout.walls;
    let n = walls.size() as i32;
    if n as usize != config.grid_size + 2 {
        return Err(format!("grid side {n}"));
    }
    for i in 0..n {
        for c in [Cell::new(0, i), Cell::new(n - 1, i), Cell::new(i, 0), Cell::new(i, n - 1)] {
            if !walls.is_wall(c) {
                return Err(format!("border cell {c:?} is floor"));
            }
        }
    }
    let floor: Vec<Cell> = common::all_cells(walls).filter(|&c| walls.is_floor(c)).collect();
    let dist = common::dijkstra(walls, floor[0]);
    if floor.iter().any(|c| dist[(c.row * n + c.col) as usize].is_none()) {
        return Err("floor not connected".into());
    }
    if !config.room_count.contains(layout.rooms.len()) {
        return Err(format!("{} rooms", layout.rooms.len()));
    }
    for room in &layout.rooms {
        for side in [room.width, room.height] {
            if !config.room_size.contains(side as usize) {
                return Err(format!("room side {side}"));
            }
        }
        if room.cells().any(|c| walls.is_wall(c)) {
            return Err("wall inside room".into());
        }
    }
    let objects: HashSet<Cell> = layout.object_cells.iter().copied().collect();
    if objects.len() != config.n_objects || objects.iter().any(|&c| walls.is_wall(c)) {
        return Err("objects overlap or sit in walls".into());
    }
    if walls.is_wall(layout.spawn_cell) {
        return Err("spawn in wall".into());
    }
    Ok(())
}

#[test]
fn layouts_satisfy_invariants_and_are_distinct() {
    for preset in Preset::ALL {
        let config = preset.config();
        let mut grids = HashSet::new();
        for seed in 0..300 {
            let layout = generate(&config, seed).unwrap();
            check_layout(&layout, &config).unwrap_or_else(|e| panic!("{preset} seed {seed}: {e}"));
            layout.validate(&config).unwrap();
            grids.insert(layout.walls.as_slice().to_vec());
        }
        assert!(grids.len() >= 297, "{preset}: only {} distinct grids of 300", grids.len());
    }
}

#[test]
fn generation_is_byte_identical_per_seed() {
    for preset in Preset::ALL {
        let a = serde_json::to_vec(&generate(&preset.config(), 77).unwrap()).unwrap();
        let b = serde_json::to_vec(&generate(&preset.config(), 77).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_seed_gives_valid_layout(seed in any::<u64>(), which in 0usize..4) {
        let config = Preset::ALL[which].config();
        let layout = generate(&config, seed).unwrap();
        prop_assert_eq!(check_layout(&layout, &config), Ok(()));
    }

    #[test]
    fn random_actions_keep_disc_clear_and_heading_unit(seed in any::<u64>(), actions in prop::collection::vec(0u8..6, 1..400)) {
        let mut config = EnvConfig::preset(Preset::Maze9x9);
        config.maze.episode_length = actions.len() as u32;
        let mut env = EnvState::reset(&config, seed).unwrap();
        let mut total = 0.0;
        for &a in &actions {
            let out = env.step(Action::from_index(a).unwrap()).unwrap();
            prop_assert!(out.reward == 0.0 || out.reward == 1.0);
            total += out.reward;
            prop_assert!(disc_clear(&env));
            let h = env.pose().heading;
            prop_assert!((h[0].hypot(h[1]) - 1.0).abs() < 1e-6);
        }
        prop_assert_eq!(total as u32, env.score());
    }
}

/// Agent disc against every wall square, by closest-point distance.
fn disc_clear(env: &EnvState) -> bool {
    let [x, y] = env.pose().position;
    let r = env.params().agent_radius;
    let walls = &env.layout().walls;
    common::all_cells(walls).filter(|&c| walls.is_wall(c)).all(|c| {
        let dx = x - x.clamp(c.col as f64, c.col as f64 + 1.0);
        let dy = y - y.clamp(c.row as f64, c.row as f64 + 1.0);
        dx * dx + dy * dy >= r * r - 1e-12
    })
}

#[test]
fn long_random_walks_never_enter_walls() {
    for preset in Preset::ALL {
        let mut config = EnvConfig::preset(preset);
        config.maze.episode_length = 100_000;
        let mut env = EnvState::reset(&config, 5).unwrap();
        let mut k = 1u64;
        // Forward-heavy mix so the agent keeps hitting walls.
        let mix = [1u8, 1, 1, 4, 5, 2, 3, 0];
        for _ in 0..100_000 {
            k = memmaze::rng::mix64(k);
            env.advance(Action::from_index(mix[(k % 8) as usize]).unwrap()).unwrap();
            if k % 97 == 0 {
                assert!(disc_clear(&env), "{preset}: disc overlaps a wall at {:?}", env.pose());
            }
        }
        assert!(disc_clear(&env));
        let h = env.pose().heading;
        assert!((h[0].hypot(h[1]) - 1.0).abs() < 1e-6);
    }
}

#[test]
fn targets_vec_matches_rigid_transform() {
    let mut k = 9u64;
    let mut uniform = || {
        k = memmaze::rng::mix64(k);
        (k >> 11) as f64 / (1u64 << 53) as f64
    };
    for seed in 0..200 {
        let mut env = EnvState::reset(&EnvConfig::preset(Preset::Maze11x11), seed).unwrap();
        let floor = env.layout().walls.floor_cells();
        let cell = floor[(uniform() * floor.len() as f64) as usize];
        let pos = [cell.col as f64 + 0.3 + 0.4 * uniform(), cell.row as f64 + 0.3 + 0.4 * uniform()];
        let angle = (uniform() - 0.5) * 2.0 * std::f64::consts::PI;
        env.set_pose(AgentPose::new(pos, angle));
        let obs = env.semantic_obs();
        for (i, &cell) in env.layout().object_cells.iter().enumerate() {
            let center = [cell.col as f64 + 0.5, cell.row as f64 + 0.5];
            let want = common::rigid_transform(pos, angle, center);
            let got = obs.targets_vec[i];
            assert!((got[0] - want[0]).abs() < 1e-9 && (got[1] - want[1]).abs() < 1e-9, "{got:?} vs {want:?}");
            assert_eq!(obs.targets_pos[i], [center[0] - 1.0, center[1] - 1.0]);
        }
    }
}

#[test]
fn first_target_is_uniform_over_objects() {
    // 1000 resets on one layout; chi-square with 2 degrees of freedom.
    let config = EnvConfig::preset(Preset::Maze9x9);
    let layout = std::sync::Arc::new(generate(&config.maze, 0).unwrap());
    let mut counts = [0usize; 3];
    for seed in 0..1000 {
        counts[EnvState::with_layout(layout.clone(), config.sim.clone(), 10, seed).target_index()] += 1;
    }
    let expected = 1000.0 / 3.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // p = exp(-chi2 / 2) for 2 degrees of freedom.
    assert!((-chi2 / 2.0).exp() > 0.01, "counts {counts:?}, chi2 {chi2}");
}

#[test]
fn replay_is_bit_identical() {
    for seed in 0..20u64 {
        let mut config = EnvConfig::preset(Preset::ALL[seed as usize % 4]);
        config.maze.episode_length = 500;
        let actions: Vec<Action> = (0..500).map(|i| Action::ALL[(memmaze::rng::mix64(seed * 1000 + i) % 6) as usize]).collect();
        let run = || {
            let mut env = EnvState::reset(&config, seed).unwrap();
            let outs: Vec<_> = actions.iter().map(|&a| env.step(a).unwrap()).collect();
            serde_json::to_vec(&outs).unwrap()
        };
        assert_eq!(run(), run());
    }
}
