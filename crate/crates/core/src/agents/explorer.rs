use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{bfs_path, waypoint_action, ControllerParams, PlanPath};
use crate::grid::Cell;
use crate::rng::{rng_from_seed, MazeRng};
use crate::sim::{Action, EnvState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Probability of replacing the planned action with a uniform random one.
    pub action_noise: f64,
    /// Steps after which a new goal is drawn even if the old one was not
    /// reached; 0 disables this.
    pub replan_interval: u32,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig { action_noise: 0.1, replan_interval: 50 }
    }
}

/// Data-collection policy: drives to uniformly random floor cells along BFS
/// paths, replanning from the current cell every step, under action noise.
#[derive(Clone, Debug)]
pub struct ExplorerPolicy {
    config: PolicyConfig,
    controller: ControllerParams,
    rng: MazeRng,
    goal: Option<Cell>,
    steps_on_goal: u32,
    goal_plan: Option<PlanPath>,
}

impl ExplorerPolicy {
    pub fn new(config: PolicyConfig, controller: ControllerParams, seed: u64) -> Self {
        assert!((0.0..=1.0).contains(&config.action_noise), "action_noise must lie in [0, 1]");
        ExplorerPolicy { config, controller, rng: rng_from_seed(seed), goal: None, steps_on_goal: 0, goal_plan: None }
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn goal(&self) -> Option<Cell> {
        self.goal
    }

    /// The path planned when the current goal was drawn.
    pub fn goal_plan(&self) -> Option<&PlanPath> {
        self.goal_plan.as_ref()
    }

    pub fn act(&mut self, state: &EnvState) -> Action {
        let walls = &state.layout().walls;
        let pose = state.pose();
        let here = pose.cell();

        let arrived = self.goal.is_some_and(|g| {
            let (gx, gy) = g.center();
            g == here && pose.distance_to([gx, gy]) < self.controller.waypoint_tolerance
        });
        let expired = self.config.replan_interval > 0 && self.steps_on_goal >= self.config.replan_interval;
        if self.goal.is_none() || arrived || expired {
            let floor = walls.floor_cells();
            let choices: Vec<Cell> = floor.into_iter().filter(|&c| c != here).collect();
            let goal = *choices.choose(&mut self.rng).unwrap_or(&here);
            self.goal = Some(goal);
            self.steps_on_goal = 0;
            self.goal_plan = bfs_path(walls, here, goal).ok();
        }
        self.steps_on_goal += 1;

        let goal = self.goal.expect("goal set above");
        let planned = match bfs_path(walls, here, goal) {
            Ok(path) => waypoint_action(pose, &path, &self.controller),
            Err(_) => Action::Noop,
        };
        if self.rng.random::<f64>() < self.config.action_noise {
            Action::ALL[self.rng.random_range(0..Action::COUNT)]
        } else {
            planned
        }
    }
}
