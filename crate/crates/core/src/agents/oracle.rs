use super::{bfs_path, waypoint_action, ControllerParams};
use crate::sim::{Action, EnvState};

/// Full-information agent: shortest path to the current target, replanned
/// every step.
#[derive(Clone, Debug, Default)]
pub struct OraclePolicy {
    controller: ControllerParams,
}

impl OraclePolicy {
    pub fn new(controller: ControllerParams) -> Self {
        OraclePolicy { controller }
    }

    pub fn act(&self, state: &EnvState) -> Action {
        let here = state.pose().cell();
        match bfs_path(&state.layout().walls, here, state.target_cell()) {
            Ok(path) => waypoint_action(state.pose(), &path, &self.controller),
            Err(_) => Action::Noop,
        }
    }

    /// Plays one full episode and returns its score.
    pub fn run_episode(&self, state: &mut EnvState) -> u32 {
        while !state.is_done() {
            let a = self.act(state);
            state.advance(a).expect("episode not done");
        }
        state.score()
    }
}
