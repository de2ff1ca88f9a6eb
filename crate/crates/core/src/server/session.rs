use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::protocol::{ClientMessage, ErrorCode, FrameMessage, ServerMessage, TopDown, MODE_PLAY, MODE_TOP_DOWN};
use crate::config::{CameraParams, EnvConfig, Preset, SimParams};
use crate::render::{render_top_down, Renderer};
use crate::sim::{Action, EnvState};
use crate::trajstore::{EpisodeLog, Recorder};

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub sim: SimParams,
    pub camera: CameraParams,
    /// Minimum time between steps in play mode.
    pub play_tick: Duration,
    /// Where finished play-mode episodes are written; `None` disables recording.
    pub record_dir: Option<PathBuf>,
    /// Pixels per cell of the top-down map.
    pub top_down_scale: u32,
    /// Answer plain HTTP `GET /` with the browser play page.
    pub serve_page: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            sim: SimParams::default(),
            camera: CameraParams::default(),
            play_tick: Duration::from_millis(250),
            record_dir: None,
            top_down_scale: 8,
            serve_page: true,
        }
    }
}

struct Live {
    config: EnvConfig,
    mode: u8,
    seed: u64,
    state: EnvState,
    renderer: Renderer,
    actions: Vec<u8>,
    recorder: Option<Recorder>,
    last_step: Option<Instant>,
}

static RECORDED: AtomicU64 = AtomicU64::new(0);

/// One client's environment. Transport-independent: every request payload
/// yields exactly one response.
pub struct Session {
    config: Arc<ServerConfig>,
    live: Option<Live>,
    /// Paths written by finished play-mode episodes.
    pub recorded: Vec<PathBuf>,
}

impl Session {
    pub fn new(config: Arc<ServerConfig>) -> Self {
        Session { config, live: None, recorded: Vec::new() }
    }

    pub fn state(&self) -> Option<&EnvState> {
        self.live.as_ref().map(|l| &l.state)
    }

    pub fn handle(&mut self, payload: &[u8]) -> ServerMessage {
        match ClientMessage::decode(payload) {
            Ok(msg) => self.apply(msg),
            Err(e) => ServerMessage::Error { code: e.code, message: e.message },
        }
    }

    pub fn apply(&mut self, msg: ClientMessage) -> ServerMessage {
        match msg {
            ClientMessage::Connect { size, seed, mode } => {
                let Some(preset) = Preset::from_size(size as usize) else {
                    return ServerMessage::error(ErrorCode::BadSize, format!("no {size}x{size} preset"));
                };
                let config = EnvConfig { maze: preset.config(), sim: self.config.sim.clone() };
                self.start(config, seed, mode)
            }
            ClientMessage::Reset { seed } => match self.live.take() {
                Some(live) => self.start(live.config, seed, live.mode),
                None => ServerMessage::error(ErrorCode::NotConnected, "RESET before CONNECT"),
            },
            ClientMessage::Step { action } => self.step(action),
        }
    }

    fn start(&mut self, config: EnvConfig, seed: u64, mode: u8) -> ServerMessage {
        let state = match EnvState::reset(&config, seed) {
            Ok(s) => s,
            Err(e) => return ServerMessage::error(ErrorCode::Internal, e.to_string()),
        };
        let mut renderer = Renderer::new(self.config.camera.clone());
        let recorder = (mode & MODE_PLAY != 0 && self.config.record_dir.is_some()).then(|| Recorder::new(&state, renderer.render(&state)));
        let live = Live { config, mode, seed, state, renderer, actions: Vec::new(), recorder, last_step: None };
        self.live = Some(live);
        self.frame(0.0)
    }

    fn step(&mut self, action: u8) -> ServerMessage {
        let tick = self.config.play_tick;
        let Some(live) = self.live.as_mut() else {
            return ServerMessage::error(ErrorCode::NotConnected, "STEP before CONNECT");
        };
        let Ok(a) = Action::from_index(action) else {
            return ServerMessage::error(ErrorCode::BadAction, format!("action {action} outside 0..=5"));
        };
        if live.state.is_done() {
            return ServerMessage::error(ErrorCode::EpisodeDone, "episode finished; send RESET");
        }
        if live.mode & MODE_PLAY != 0 {
            if let Some(last) = live.last_step {
                let due = last + tick;
                let now = Instant::now();
                if due > now {
                    std::thread::sleep(due - now);
                }
            }
            live.last_step = Some(Instant::now());
        }
        let outcome = match live.state.step(a) {
            Ok(o) => o,
            Err(e) => return ServerMessage::error(ErrorCode::Internal, e.to_string()),
        };
        live.actions.push(action);
        if let Some(rec) = live.recorder.as_mut() {
            rec.push(a, outcome.reward, &outcome.semantic, live.renderer.render(&live.state));
        }
        if outcome.done {
            if let Err(e) = self.save_recording() {
                return ServerMessage::error(ErrorCode::Internal, format!("recording failed: {e}"));
            }
        }
        self.frame(outcome.reward)
    }

    fn save_recording(&mut self) -> Result<(), crate::trajstore::TrajError> {
        let (Some(live), Some(dir)) = (self.live.as_mut(), self.config.record_dir.as_ref()) else {
            return Ok(());
        };
        let Some(rec) = live.recorder.take() else {
            return Ok(());
        };
        std::fs::create_dir_all(dir)?;
        let n = RECORDED.fetch_add(1, Ordering::Relaxed);
        let millis = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_millis());
        let stem = format!("play-{}-{:016x}-{millis}-{n}", live.config.maze.grid_size, live.seed);
        let record = rec.finish();
        record.validate()?;
        let npz = dir.join(format!("{stem}.npz"));
        record.save(&npz)?;
        let log = EpisodeLog { config: live.config.clone(), seed: live.seed, actions: live.actions.clone(), score: Some(live.state.score()) };
        let json = dir.join(format!("{stem}.json"));
        log.save(&json)?;
        self.recorded.push(npz);
        self.recorded.push(json);
        Ok(())
    }

    fn frame(&mut self, reward: f32) -> ServerMessage {
        let scale = self.config.top_down_scale;
        let live = self.live.as_mut().expect("frame only after start");
        let rgb = live.renderer.render(&live.state).as_bytes().to_vec();
        let top_down = (live.mode & MODE_TOP_DOWN != 0).then(|| {
            let img = render_top_down(&live.state, scale);
            TopDown { width: img.width() as u16, height: img.height() as u16, rgb: img.into_raw() }
        });
        ServerMessage::Frame(FrameMessage {
            reward,
            done: live.state.is_done(),
            score: live.state.score(),
            step: live.state.step_count(),
            rgb,
            top_down,
        })
    }
}
