//! Discrete-time scavenger-hunt environment.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{EnvConfig, SimParams};
use crate::grid::Cell;
use crate::mazegen::{generate, MazeError, MazeLayout};
use crate::rng::{derive_seed, rng_from_seed, MazeRng};

const ENV_STREAM: u64 = 0x656E_76;
/// Gap left between the agent disc and a wall after a clamped move.
const CONTACT_GAP: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Maze(#[from] MazeError),
    #[error("step called on a finished episode")]
    SteppedAfterDone,
    #[error("action index {0} outside 0..=5")]
    BadAction(u8),
}

/// The six discrete actions. `(forward, turn)` with turn -1 = left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Action {
    Noop = 0,
    Forward = 1,
    TurnLeft = 2,
    TurnRight = 3,
    ForwardLeft = 4,
    ForwardRight = 5,
}

impl Action {
    pub const ALL: [Action; 6] =
        [Action::Noop, Action::Forward, Action::TurnLeft, Action::TurnRight, Action::ForwardLeft, Action::ForwardRight];
    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: u8) -> Result<Action, SimError> {
        Action::ALL.get(index as usize).copied().ok_or(SimError::BadAction(index))
    }

    /// `(forward, turn)` controls.
    pub fn controls(self) -> (f64, f64) {
        match self {
            Action::Noop => (0.0, 0.0),
            Action::Forward => (1.0, 0.0),
            Action::TurnLeft => (0.0, -1.0),
            Action::TurnRight => (0.0, 1.0),
            Action::ForwardLeft => (1.0, -1.0),
            Action::ForwardRight => (1.0, 1.0),
        }
    }

    pub fn from_controls(forward: bool, turn: i8) -> Action {
        match (forward, turn.signum()) {
            (false, 0) => Action::Noop,
            (true, 0) => Action::Forward,
            (false, -1) => Action::TurnLeft,
            (false, _) => Action::TurnRight,
            (true, -1) => Action::ForwardLeft,
            (true, _) => Action::ForwardRight,
        }
    }
}

/// Agent position (full-grid world coordinates) and unit heading.
///
/// Positive turns rotate from +x towards +y; with y pointing down the rows
/// that is clockwise on a top-down map, i.e. a right turn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentPose {
    pub position: [f64; 2],
    pub heading: [f64; 2],
}

impl AgentPose {
    pub fn new(position: [f64; 2], angle: f64) -> Self {
        AgentPose { position, heading: [angle.cos(), angle.sin()] }
    }

    pub fn cell(&self) -> Cell {
        Cell::containing(self.position[0], self.position[1])
    }

    pub fn angle(&self) -> f64 {
        self.heading[1].atan2(self.heading[0])
    }

    /// Unit vector pointing to the agent's right.
    pub fn right(&self) -> [f64; 2] {
        [-self.heading[1], self.heading[0]]
    }

    /// `R(-theta) * (point - position)`: x is distance ahead, y is distance to the right.
    pub fn to_agent_frame(&self, point: [f64; 2]) -> [f64; 2] {
        let dx = point[0] - self.position[0];
        let dy = point[1] - self.position[1];
        let [c, s] = self.heading;
        [c * dx + s * dy, -s * dx + c * dy]
    }

    pub fn distance_to(&self, point: [f64; 2]) -> f64 {
        (point[0] - self.position[0]).hypot(point[1] - self.position[1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: f32,
    pub done: bool,
    pub semantic: SemanticObs,
}

/// Privileged observation. Positions are in the interior (`maze_layout`)
/// frame, where layout tile `(r, c)` spans `x in [c, c+1)`, `y in [r, r+1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticObs {
    pub layout_size: usize,
    /// Row-major `N x N`, 1 = wall.
    pub maze_layout: Vec<u8>,
    pub agent_pos: [f64; 2],
    pub agent_dir: [f64; 2],
    pub targets_pos: Vec<[f64; 2]>,
    pub targets_vec: Vec<[f64; 2]>,
    pub target_pos: [f64; 2],
    pub target_vec: [f64; 2],
    /// RGB in [0, 1].
    pub target_color: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct EnvState {
    layout: Arc<MazeLayout>,
    params: SimParams,
    episode_length: u32,
    turn_cos_sin: (f64, f64),
    pose: AgentPose,
    target_index: usize,
    step: u32,
    score: u32,
    rng: MazeRng,
}

impl EnvState {
    /// Fresh episode on a newly generated maze.
    pub fn reset(config: &EnvConfig, seed: u64) -> Result<Self, SimError> {
        let layout = generate(&config.maze, seed)?;
        Ok(Self::with_layout(Arc::new(layout), config.sim.clone(), config.maze.episode_length, seed))
    }

    /// Fresh episode on an existing layout; the agent starts at the layout's spawn.
    pub fn with_layout(layout: Arc<MazeLayout>, params: SimParams, episode_length: u32, seed: u64) -> Self {
        let mut rng = rng_from_seed(derive_seed(seed, ENV_STREAM, 0));
        let target_index = rng.random_range(0..layout.n_objects());
        let (sx, sy) = layout.spawn_cell.center();
        let pose = AgentPose::new([sx, sy], layout.spawn_heading);
        let turn = params.turn_rate();
        EnvState {
            layout,
            params,
            episode_length,
            turn_cos_sin: (turn.cos(), turn.sin()),
            pose,
            target_index,
            step: 0,
            score: 0,
            rng,
        }
    }

    pub fn layout(&self) -> &Arc<MazeLayout> {
        &self.layout
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn pose(&self) -> &AgentPose {
        &self.pose
    }

    /// Teleports the agent. Panics if the agent disc would overlap a wall.
    pub fn set_pose(&mut self, pose: AgentPose) {
        assert!(self.disc_is_clear(pose.position), "pose {pose:?} overlaps a wall");
        let norm = pose.heading[0].hypot(pose.heading[1]);
        self.pose = AgentPose { position: pose.position, heading: [pose.heading[0] / norm, pose.heading[1] / norm] };
    }

    pub fn set_target(&mut self, index: usize) {
        assert!(index < self.layout.n_objects());
        self.target_index = index;
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    pub fn target_cell(&self) -> Cell {
        self.layout.object_cells[self.target_index]
    }

    pub fn target_color(&self) -> [u8; 3] {
        self.layout.object_colors[self.target_index]
    }

    pub fn step_count(&self) -> u32 {
        self.step
    }

    pub fn score(&self) -> u32 {
        self.score
    }

    pub fn episode_length(&self) -> u32 {
        self.episode_length
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.episode_length
    }

    /// Object centers in world coordinates.
    pub fn object_center(&self, index: usize) -> [f64; 2] {
        let (x, y) = self.layout.object_cells[index].center();
        [x, y]
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome, SimError> {
        let (reward, done) = self.advance(action)?;
        Ok(StepOutcome { reward, done, semantic: self.semantic_obs() })
    }

    /// [`EnvState::step`] without building the semantic observation.
    pub fn advance(&mut self, action: Action) -> Result<(f32, bool), SimError> {
        if self.is_done() {
            return Err(SimError::SteppedAfterDone);
        }
        let (forward, turn) = action.controls();
        if turn != 0.0 {
            let (c, s) = self.turn_cos_sin;
            let s = s * turn;
            let [hx, hy] = self.pose.heading;
            let (nx, ny) = (hx * c - hy * s, hx * s + hy * c);
            let norm = nx.hypot(ny);
            self.pose.heading = [nx / norm, ny / norm];
        }
        if forward != 0.0 {
            let d = forward * self.params.forward_speed;
            let delta = [self.pose.heading[0] * d, self.pose.heading[1] * d];
            self.pose.position = self.slide(self.pose.position, delta);
        }

        let mut reward = 0.0;
        if self.pose.distance_to(self.object_center(self.target_index)) < self.params.touch_radius {
            reward = 1.0;
            self.score += 1;
            let k = self.layout.n_objects();
            if k > 1 {
                let pick = self.rng.random_range(0..k - 1);
                self.target_index = if pick >= self.target_index { pick + 1 } else { pick };
            }
        }
        self.step += 1;
        Ok((reward, self.is_done()))
    }

    pub fn semantic_obs(&self) -> SemanticObs {
        let to_layout = |p: [f64; 2]| [p[0] - 1.0, p[1] - 1.0];
        let n = self.layout.n_objects();
        let centers: Vec<[f64; 2]> = (0..n).map(|i| self.object_center(i)).collect();
        let color = self.target_color();
        SemanticObs {
            layout_size: self.layout.interior_size(),
            maze_layout: self.layout.maze_layout(),
            agent_pos: to_layout(self.pose.position),
            agent_dir: self.pose.heading,
            targets_pos: centers.iter().map(|&p| to_layout(p)).collect(),
            targets_vec: centers.iter().map(|&p| self.pose.to_agent_frame(p)).collect(),
            target_pos: to_layout(centers[self.target_index]),
            target_vec: self.pose.to_agent_frame(centers[self.target_index]),
            target_color: color.map(|c| c as f64 / 255.0),
        }
    }

    /// True if the agent disc centred at `p` overlaps no wall cell.
    pub fn disc_is_clear(&self, p: [f64; 2]) -> bool {
        let r = self.params.agent_radius;
        let walls = &self.layout.walls;
        let (c0, c1) = ((p[0] - r).floor() as i32, (p[0] + r).floor() as i32);
        let (r0, r1) = ((p[1] - r).floor() as i32, (p[1] + r).floor() as i32);
        for row in r0..=r1 {
            for col in c0..=c1 {
                let cell = Cell::new(row, col);
                if walls.is_wall(cell) {
                    let nx = p[0].clamp(col as f64, col as f64 + 1.0);
                    let ny = p[1].clamp(row as f64, row as f64 + 1.0);
                    if (p[0] - nx).hypot(p[1] - ny) < r {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Axis-separated move: x first, then y, each clamped against the
    /// wall cells newly overlapped by the agent's bounding square.
    fn slide(&self, pos: [f64; 2], delta: [f64; 2]) -> [f64; 2] {
        let x = self.move_axis(pos, 0, delta[0]);
        let y = self.move_axis([x, pos[1]], 1, delta[1]);
        [x, y]
    }

    fn move_axis(&self, pos: [f64; 2], axis: usize, d: f64) -> f64 {
        let r = self.params.agent_radius;
        let here = pos[axis];
        if d == 0.0 {
            return here;
        }
        let other = pos[1 - axis];
        let (lo, hi) = ((other - r).floor() as i32, (other + r).ceil() as i32 - 1);
        let blocked = |line: i32| {
            (lo..=hi).any(|j| {
                let cell = if axis == 0 { Cell::new(j, line) } else { Cell::new(line, j) };
                self.layout.walls.is_wall(cell)
            })
        };
        let target = here + d;
        if d > 0.0 {
            let before = (here + r).ceil() as i32 - 1;
            let after = (target + r).ceil() as i32 - 1;
            for line in before + 1..=after {
                if blocked(line) {
                    return line as f64 - r - CONTACT_GAP;
                }
            }
        } else {
            let before = (here - r).floor() as i32;
            let after = (target - r).floor() as i32;
            for line in (after..before).rev() {
                if blocked(line) {
                    return line as f64 + 1.0 + r + CONTACT_GAP;
                }
            }
        }
        target
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Preset;
    use crate::grid::WallGrid;
    use crate::mazegen::PALETTE;

    /// Corridor of 5 floor cells along row 1 with objects at both ends.
    pub(crate) fn corridor_state() -> EnvState {
        let walls = WallGrid::from_ascii(&["#######", "#.....#", "#######", "#######", "#######", "#######", "#######"]);
        let layout = MazeLayout {
            walls,
            rooms: vec![],
            object_cells: vec![Cell::new(1, 1), Cell::new(1, 5)],
            object_colors: PALETTE[..2].to_vec(),
            spawn_cell: Cell::new(1, 3),
            spawn_heading: 0.0,
        };
        EnvState::with_layout(Arc::new(layout), SimParams::default(), 100, 0)
    }

    #[test]
    fn action_table() {
        let table: Vec<(f64, f64)> = Action::ALL.iter().map(|a| a.controls()).collect();
        assert_eq!(table, vec![(0.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0), (1.0, -1.0), (1.0, 1.0)]);
        for a in Action::ALL {
            let (f, t) = a.controls();
            assert_eq!(Action::from_controls(f > 0.0, t as i8), a);
            assert_eq!(Action::from_index(a as u8).unwrap(), a);
        }
        assert!(matches!(Action::from_index(6), Err(SimError::BadAction(6))));
    }

    #[test]
    fn reset_small_preset() {
        let s = EnvState::reset(&EnvConfig::preset(Preset::Maze9x9), 3).unwrap();
        assert_eq!(s.layout().n_objects(), 3);
        assert_eq!(s.episode_length(), 1000);
        assert_eq!((s.step_count(), s.score()), (0, 0));
    }

    #[test]
    fn noop_keeps_pose() {
        let mut s = EnvState::reset(&EnvConfig::preset(Preset::Maze9x9), 5).unwrap();
        let before = *s.pose();
        let out = s.step(Action::Noop).unwrap();
        assert_eq!(*s.pose(), before);
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn wrong_object_has_no_effect() {
        let mut s = corridor_state();
        s.set_target(1);
        s.set_pose(AgentPose::new([2.5, 1.5], std::f64::consts::PI));
        let mut total = 0.0;
        for _ in 0..6 {
            total += s.step(Action::Forward).unwrap().reward;
        }
        assert!(s.pose().distance_to(s.object_center(0)) < 0.6);
        assert_eq!(total, 0.0);
        assert_eq!(s.target_index(), 1);
    }

    #[test]
    fn touching_target_rewards_and_resamples() {
        let mut s = corridor_state();
        s.set_target(0);
        // 0.05 from the object center, well inside the touch radius.
        s.set_pose(AgentPose::new([1.55, 1.5], 0.0));
        let out = s.step(Action::Noop).unwrap();
        assert_eq!(out.reward, 1.0);
        assert_eq!(s.score(), 1);
        assert_eq!(s.target_index(), 1);
        // Staying on the old target yields nothing more.
        assert_eq!(s.step(Action::Noop).unwrap().reward, 0.0);
    }

    #[test]
    fn touch_boundary_matches_radius() {
        let r = SimParams::default().touch_radius;
        for (offset, expected) in [(r - 1e-6, 1.0), (r + 1e-6, 0.0)] {
            let mut s = corridor_state();
            s.set_target(1);
            s.set_pose(AgentPose::new([5.5 - offset, 1.5], 0.0));
            assert_eq!(s.step(Action::Noop).unwrap().reward, expected, "offset {offset}");
        }
    }

    #[test]
    fn wall_blocks_and_slides() {
        let mut s = corridor_state();
        s.set_pose(AgentPose::new([3.5, 1.5], -std::f64::consts::FRAC_PI_4));
        for _ in 0..20 {
            s.step(Action::Forward).unwrap();
            assert!(s.disc_is_clear(s.pose().position));
        }
        let [x, y] = s.pose().position;
        // Pinned against the top wall, having slid along +x to the end wall.
        assert!((y - 1.2).abs() < 1e-6, "y = {y}");
        assert!((x - 5.8).abs() < 1e-6, "x = {x}");
    }

    #[test]
    fn episode_ends_and_rejects_further_steps() {
        let mut s = corridor_state();
        for i in 0..100 {
            let out = s.step(Action::TurnLeft).unwrap();
            assert_eq!(out.done, i == 99);
        }
        assert!(matches!(s.step(Action::Noop), Err(SimError::SteppedAfterDone)));
    }

    #[test]
    fn semantic_identities() {
        let mut s = corridor_state();
        s.set_pose(AgentPose::new([1.5, 1.5], 0.0));
        let obs = s.semantic_obs();
        assert_eq!(obs.targets_vec[0], [0.0, 0.0]);
        // Heading +x: agent frame is a pure translation.
        assert_eq!(obs.targets_vec[1], [4.0, 0.0]);
        assert_eq!(obs.agent_pos, [0.5, 0.5]);
        assert_eq!(obs.targets_pos[1], [4.5, 0.5]);
        assert_eq!(obs.maze_layout.len(), 25);
    }

    #[test]
    fn left_turn_is_counterclockwise_on_map() {
        let mut s = corridor_state();
        s.set_pose(AgentPose::new([3.5, 1.5], 0.0));
        s.step(Action::TurnLeft).unwrap();
        // y points down the rows, so a left turn from +x tilts towards -y.
        assert!(s.pose().heading[1] < 0.0);
    }
}
