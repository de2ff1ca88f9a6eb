use rayon::prelude::*;
use thiserror::Error;

use crate::config::{CameraParams, EnvConfig};
use crate::render::{render_into, Frame, FRAME_BYTES, FRAME_SIZE};
use crate::rng::derive_seed;
use crate::sim::{Action, EnvState, SimError};

const LANE_STREAM: u64 = 0xBA7C;

/// Seed of episode `episode` on lane `lane`.
pub fn lane_seed(master: u64, lane: usize, episode: u64) -> u64 {
    derive_seed(derive_seed(master, LANE_STREAM, lane as u64), LANE_STREAM, episode)
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("expected {expected} actions, got {got}")]
    WrongCount { expected: usize, got: usize },
    #[error("lane {lane}: action {action} outside 0..=5")]
    BadAction { lane: usize, action: u8 },
    #[error(transparent)]
    Sim(#[from] SimError),
}

struct Lane {
    state: EnvState,
    episode: u64,
    frame: Frame,
    depth: [f64; FRAME_SIZE],
}

impl Lane {
    fn new(config: &EnvConfig, master: u64, lane: usize) -> Result<Self, SimError> {
        let state = EnvState::reset(config, lane_seed(master, lane, 0))?;
        Ok(Lane { state, episode: 0, frame: Frame::default(), depth: [0.0; FRAME_SIZE] })
    }

    fn step(&mut self, config: &EnvConfig, master: u64, lane: usize, action: Action, camera: Option<&CameraParams>) -> Result<LaneResult, SimError> {
        let (reward, done) = self.state.advance(action)?;
        let result = LaneResult { reward, done, score: self.state.score(), step: self.state.step_count() };
        if let Some(camera) = camera {
            render_into(camera, &self.state, &mut self.frame, &mut self.depth);
        }
        if done {
            self.episode += 1;
            self.state = EnvState::reset(config, lane_seed(master, lane, self.episode))?;
        }
        Ok(result)
    }
}

/// What one lane reported for one step. After `done` the lane has already
/// moved on to a fresh episode; `score` and `step` describe the finished one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaneResult {
    pub reward: f32,
    pub done: bool,
    pub score: u32,
    pub step: u32,
}

/// `B` independent environments stepped in lockstep.
pub struct BatchedEnv {
    config: EnvConfig,
    master_seed: u64,
    camera: Option<CameraParams>,
    parallel: bool,
    lanes: Vec<Lane>,
}

impl BatchedEnv {
    /// `camera = None` skips rendering.
    pub fn new(config: EnvConfig, lanes: usize, master_seed: u64, camera: Option<CameraParams>) -> Result<Self, SimError> {
        let lanes = (0..lanes).map(|i| Lane::new(&config, master_seed, i)).collect::<Result<Vec<_>, _>>()?;
        let mut env = BatchedEnv { config, master_seed, camera, parallel: false, lanes };
        if let Some(camera) = &env.camera {
            for lane in &mut env.lanes {
                render_into(camera, &lane.state, &mut lane.frame, &mut lane.depth);
            }
        }
        Ok(env)
    }

    /// Steps lanes on the rayon pool. Results keep lane order either way.
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn len(&self) -> usize {
        self.lanes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }

    pub fn state(&self, lane: usize) -> &EnvState {
        &self.lanes[lane].state
    }

    /// Episodes finished so far on `lane`.
    pub fn episodes_done(&self, lane: usize) -> u64 {
        self.lanes[lane].episode
    }

    /// Latest frame of `lane`; on a `done` step this is the final frame of
    /// the finished episode.
    pub fn frame(&self, lane: usize) -> &Frame {
        &self.lanes[lane].frame
    }

    /// All lane frames, concatenated in lane order.
    pub fn frames_into(&self, out: &mut Vec<u8>) {
        out.clear();
        out.reserve(self.lanes.len() * FRAME_BYTES);
        for lane in &self.lanes {
            out.extend_from_slice(lane.frame.as_bytes());
        }
    }

    /// Validates every action before stepping any lane.
    pub fn batch_step(&mut self, actions: &[u8]) -> Result<Vec<LaneResult>, BatchError> {
        if actions.len() != self.lanes.len() {
            return Err(BatchError::WrongCount { expected: self.lanes.len(), got: actions.len() });
        }
        let parsed = actions
            .iter()
            .enumerate()
            .map(|(lane, &a)| Action::from_index(a).map_err(|_| BatchError::BadAction { lane, action: a }))
            .collect::<Result<Vec<_>, _>>()?;
        let (config, master, camera) = (&self.config, self.master_seed, self.camera.as_ref());
        let run = |(i, (lane, a)): (usize, (&mut Lane, Action))| lane.step(config, master, i, a, camera);
        let results: Result<Vec<_>, SimError> = if self.parallel {
            self.lanes.par_iter_mut().zip(parsed).enumerate().map(run).collect()
        } else {
            self.lanes.iter_mut().zip(parsed).enumerate().map(run).collect()
        };
        Ok(results?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Preset;
    use crate::render::Renderer;

    fn config() -> EnvConfig {
        let mut c = EnvConfig::preset(Preset::Maze9x9);
        c.maze.episode_length = 30;
        c
    }

    #[test]
    fn single_lane_matches_single_env() {
        let mut batch = BatchedEnv::new(config(), 1, 7, Some(CameraParams::default())).unwrap();
        let mut env = EnvState::reset(&config(), lane_seed(7, 0, 0)).unwrap();
        let mut renderer = Renderer::default();
        for t in 0..29u32 {
            let a = (t * 7 % 6) as u8;
            let got = batch.batch_step(&[a]).unwrap()[0];
            let want = env.step(Action::from_index(a).unwrap()).unwrap();
            assert_eq!((got.reward, got.done, got.score, got.step), (want.reward, want.done, env.score(), env.step_count()));
            assert_eq!(batch.state(0).pose(), env.pose());
            assert_eq!(batch.frame(0), renderer.render(&env));
        }
    }

    #[test]
    fn noop_keeps_every_pose() {
        let mut batch = BatchedEnv::new(config(), 64, 1, None).unwrap();
        let before: Vec<_> = (0..64).map(|i| *batch.state(i).pose()).collect();
        batch.batch_step(&[0; 64]).unwrap();
        for (i, p) in before.iter().enumerate() {
            assert_eq!(batch.state(i).pose(), p);
        }
    }

    #[test]
    fn bad_action_names_lane_and_steps_nothing() {
        let mut batch = BatchedEnv::new(config(), 3, 1, None).unwrap();
        match batch.batch_step(&[1, 6, 1]) {
            Err(BatchError::BadAction { lane: 1, action: 6 }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(batch.batch_step(&[1]), Err(BatchError::WrongCount { expected: 3, got: 1 })));
        assert_eq!(batch.state(0).step_count(), 0);
    }

    #[test]
    fn done_reports_then_resets_with_next_seed() {
        let mut batch = BatchedEnv::new(config(), 2, 3, None).unwrap();
        for _ in 0..29 {
            assert!(batch.batch_step(&[1, 4]).unwrap().iter().all(|r| !r.done));
        }
        let last = batch.batch_step(&[1, 4]).unwrap();
        assert!(last.iter().all(|r| r.done && r.step == 30));
        assert_eq!(batch.state(1).step_count(), 0);
        assert_eq!(batch.episodes_done(1), 1);
        let fresh = EnvState::reset(&config(), lane_seed(3, 1, 1)).unwrap();
        assert_eq!(batch.state(1).pose(), fresh.pose());
        assert_eq!(batch.state(1).layout().walls, fresh.layout().walls);
    }

    #[test]
    fn parallel_matches_serial() {
        let run = |parallel| {
            let mut batch = BatchedEnv::new(config(), 8, 11, Some(CameraParams::default())).unwrap().with_parallel(parallel);
            let mut log = Vec::new();
            let mut frames = Vec::new();
            for t in 0..45usize {
                let actions: Vec<u8> = (0..8).map(|i| ((t * 5 + i * 3) % 6) as u8).collect();
                log.extend(batch.batch_step(&actions).unwrap());
                batch.frames_into(&mut frames);
                log.push(LaneResult { reward: frames.iter().map(|&b| b as f32).sum(), done: false, score: 0, step: 0 });
            }
            log
        };
        assert_eq!(run(false), run(true));
    }
}
