//! Trajectory recording and the NPZ dataset format.
//!
//! One trajectory of `T` steps is stored as an uncompressed zip with one
//! `<key>.npy` entry per key. Time-indexed keys have `T + 1` rows: row 0 is
//! the state before the first action, row `t` the state after action `t`.
//! `maze_layout` is static and has no time axis. Floats are 32-bit.

mod dataset;
pub mod npy;

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2, Array3, Array4, ArrayD, Dimension, Ix1, Ix2, Ix3};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

pub use dataset::{generate_dataset, verify_dataset, DatasetManifest, DatasetSpec, FileEntry, SplitManifest, MANIFEST_FILE};
pub use npy::NpyElement;

use crate::agents::{ControllerParams, ExplorerPolicy, PolicyConfig};
use crate::config::{CameraParams, EnvConfig};
use crate::mazegen::generate;
use crate::render::{Frame, Renderer, FRAME_SIZE};
use crate::rng::derive_seed;
use crate::sim::{Action, EnvState, SemanticObs, SimError};

/// Bumped whenever recorded bytes for a given seed would change.
pub const FORMAT_VERSION: u32 = 1;

/// Entry names, in archive order.
pub const KEYS: [&str; 11] = [
    "image",
    "action",
    "reward",
    "maze_layout",
    "agent_pos",
    "agent_dir",
    "targets_pos",
    "targets_vec",
    "target_pos",
    "target_vec",
    "target_color",
];

const EXPLORER_STREAM: u64 = 0x4558_504c;

#[derive(Debug, Error)]
pub enum TrajError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("format: {0}")]
    Format(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("manifest: {0}")]
    Manifest(String),
}

impl From<zip::result::ZipError> for TrajError {
    fn from(e: zip::result::ZipError) -> Self {
        match e {
            zip::result::ZipError::Io(e) => TrajError::Io(e),
            zip::result::ZipError::FileNotFound => TrajError::Schema("missing entry".into()),
            other => TrajError::Format(other.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub image: Array4<u8>,
    /// One-hot over the six actions; row 0 is all zeros.
    pub action: Array2<u8>,
    pub reward: Array1<f32>,
    pub maze_layout: Array2<u8>,
    pub agent_pos: Array2<f32>,
    pub agent_dir: Array2<f32>,
    pub targets_pos: Array3<f32>,
    pub targets_vec: Array3<f32>,
    pub target_pos: Array2<f32>,
    pub target_vec: Array2<f32>,
    pub target_color: Array2<f32>,
}

impl TrajectoryRecord {
    /// Number of actions `T`.
    pub fn steps(&self) -> usize {
        self.reward.len() - 1
    }

    pub fn n_objects(&self) -> usize {
        self.targets_pos.shape()[1]
    }

    pub fn layout_size(&self) -> usize {
        self.maze_layout.nrows()
    }

    /// `(key, shape)` for every entry, in archive order.
    pub fn shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let shapes: [&[usize]; 11] = [
            self.image.shape(),
            self.action.shape(),
            self.reward.shape(),
            self.maze_layout.shape(),
            self.agent_pos.shape(),
            self.agent_dir.shape(),
            self.targets_pos.shape(),
            self.targets_vec.shape(),
            self.target_pos.shape(),
            self.target_vec.shape(),
            self.target_color.shape(),
        ];
        KEYS.iter().copied().zip(shapes.iter().map(|s| s.to_vec())).collect()
    }

    pub fn total_reward(&self) -> f32 {
        self.reward.sum()
    }

    /// Decoded actions `1..=T`.
    pub fn actions(&self) -> Result<Vec<Action>, TrajError> {
        self.action
            .outer_iter()
            .skip(1)
            .enumerate()
            .map(|(t, row)| {
                let hot: Vec<usize> = row.iter().enumerate().filter(|(_, &v)| v != 0).map(|(i, _)| i).collect();
                match hot.as_slice() {
                    [i] if row[*i] == 1 => Ok(Action::ALL[*i]),
                    _ => Err(TrajError::Schema(format!("action row {} is not one-hot: {row}", t + 1))),
                }
            })
            .collect()
    }

    /// Checks shapes, one-hot actions, the zero first row, binary layout and
    /// unit heading vectors.
    pub fn validate(&self) -> Result<(), TrajError> {
        let bad = |m: String| Err(TrajError::Schema(m));
        let rows = self.reward.len();
        if rows < 2 {
            return bad(format!("need at least one step, got {rows} rows"));
        }
        let (k, n) = (self.n_objects(), self.layout_size());
        let expect: [(&str, &[usize], Vec<usize>); 10] = [
            ("image", self.image.shape(), vec![rows, FRAME_SIZE, FRAME_SIZE, 3]),
            ("action", self.action.shape(), vec![rows, Action::COUNT]),
            ("maze_layout", self.maze_layout.shape(), vec![n, n]),
            ("agent_pos", self.agent_pos.shape(), vec![rows, 2]),
            ("agent_dir", self.agent_dir.shape(), vec![rows, 2]),
            ("targets_pos", self.targets_pos.shape(), vec![rows, k, 2]),
            ("targets_vec", self.targets_vec.shape(), vec![rows, k, 2]),
            ("target_pos", self.target_pos.shape(), vec![rows, 2]),
            ("target_vec", self.target_vec.shape(), vec![rows, 2]),
            ("target_color", self.target_color.shape(), vec![rows, 3]),
        ];
        for (key, got, want) in expect {
            if got != want.as_slice() {
                return bad(format!("{key} has shape {got:?}, expected {want:?}"));
            }
        }
        if k == 0 || n == 0 {
            return bad("empty object or layout axis".into());
        }
        if self.action.row(0).iter().any(|&v| v != 0) {
            return bad("action[0] must be all zeros".into());
        }
        self.actions()?;
        if self.reward[0] != 0.0 {
            return bad(format!("reward[0] = {}, expected 0", self.reward[0]));
        }
        if self.maze_layout.iter().any(|&v| v > 1) {
            return bad("maze_layout must be binary".into());
        }
        for (t, d) in self.agent_dir.outer_iter().enumerate() {
            let norm = (d[0] as f64).hypot(d[1] as f64);
            if (norm - 1.0).abs() > 1e-5 {
                return bad(format!("agent_dir[{t}] has norm {norm}"));
            }
        }
        Ok(())
    }

    /// Serialized archive bytes.
    pub fn to_npz_bytes(&self) -> Result<Vec<u8>, TrajError> {
        let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
        let options = SimpleFileOptions::default()
            .compression_method(CompressionMethod::Stored)
            .last_modified_time(DateTime::default());
        let mut put = |key: &str, bytes: Vec<u8>| -> Result<(), TrajError> {
            zip.start_file(format!("{key}.npy"), options)?;
            zip.write_all(&bytes)?;
            Ok(())
        };
        put("image", npy::to_npy_bytes(self.image.view()))?;
        put("action", npy::to_npy_bytes(self.action.view()))?;
        put("reward", npy::to_npy_bytes(self.reward.view()))?;
        put("maze_layout", npy::to_npy_bytes(self.maze_layout.view()))?;
        put("agent_pos", npy::to_npy_bytes(self.agent_pos.view()))?;
        put("agent_dir", npy::to_npy_bytes(self.agent_dir.view()))?;
        put("targets_pos", npy::to_npy_bytes(self.targets_pos.view()))?;
        put("targets_vec", npy::to_npy_bytes(self.targets_vec.view()))?;
        put("target_pos", npy::to_npy_bytes(self.target_pos.view()))?;
        put("target_vec", npy::to_npy_bytes(self.target_vec.view()))?;
        put("target_color", npy::to_npy_bytes(self.target_color.view()))?;
        Ok(zip.finish()?.into_inner())
    }

    pub fn save(&self, path: &Path) -> Result<(), TrajError> {
        fs::write(path, self.to_npz_bytes()?)?;
        Ok(())
    }

    /// Loads and validates a trajectory file.
    pub fn load(path: &Path) -> Result<Self, TrajError> {
        Self::from_npz_bytes(&fs::read(path)?)
    }

    pub fn from_npz_bytes(bytes: &[u8]) -> Result<Self, TrajError> {
        let mut a = NpzArchive::from_bytes(bytes)?;
        let record = TrajectoryRecord {
            image: a.array("image")?,
            action: a.array("action")?,
            reward: a.array("reward")?,
            maze_layout: a.array("maze_layout")?,
            agent_pos: a.array("agent_pos")?,
            agent_dir: a.array("agent_dir")?,
            targets_pos: a.array("targets_pos")?,
            targets_vec: a.array("targets_vec")?,
            target_pos: a.array("target_pos")?,
            target_vec: a.array("target_vec")?,
            target_color: a.array("target_color")?,
        };
        record.validate()?;
        Ok(record)
    }
}

/// Random access to the entries of an NPZ archive.
pub struct NpzArchive<R> {
    zip: ZipArchive<R>,
}

impl NpzArchive<Cursor<Vec<u8>>> {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrajError> {
        Ok(NpzArchive { zip: ZipArchive::new(Cursor::new(bytes.to_vec()))? })
    }
}

impl NpzArchive<fs::File> {
    pub fn open(path: &Path) -> Result<Self, TrajError> {
        Ok(NpzArchive { zip: ZipArchive::new(fs::File::open(path)?)? })
    }
}

impl<R: Read + std::io::Seek> NpzArchive<R> {
    pub fn keys(&self) -> Vec<String> {
        self.zip.file_names().filter_map(|n| n.ok()?.strip_suffix(".npy").map(str::to_string)).collect()
    }

    fn entry_bytes(&mut self, key: &str) -> Result<Vec<u8>, TrajError> {
        let mut entry = self.zip.by_name(&format!("{key}.npy")).map_err(|e| match e {
            zip::result::ZipError::FileNotFound => TrajError::Schema(format!("missing key {key}")),
            e => e.into(),
        })?;
        let mut bytes = Vec::with_capacity(entry.size() as usize);
        entry.read_to_end(&mut bytes)?;
        Ok(bytes)
    }

    pub fn array_dyn<T: NpyElement>(&mut self, key: &str) -> Result<ArrayD<T>, TrajError> {
        let bytes = self.entry_bytes(key)?;
        npy::from_npy_bytes(&bytes).map_err(|e| match e {
            TrajError::Format(m) => TrajError::Format(format!("{key}: {m}")),
            e => e,
        })
    }

    /// Entry `key` with a fixed dimensionality.
    pub fn array<T: NpyElement, D: Dimension>(&mut self, key: &str) -> Result<ndarray::Array<T, D>, TrajError> {
        let a = self.array_dyn::<T>(key)?;
        let shape = a.shape().to_vec();
        a.into_dimensionality::<D>()
            .map_err(|_| TrajError::Schema(format!("{key} has {} axes ({shape:?})", shape.len())))
    }
}

/// The keys the probe reads, without the images.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticTrajectory {
    pub maze_layout: Array2<u8>,
    pub agent_pos: Array2<f32>,
    pub agent_dir: Array2<f32>,
    pub targets_vec: Array3<f32>,
    pub reward: Array1<f32>,
}

impl SemanticTrajectory {
    pub fn load(path: &Path) -> Result<Self, TrajError> {
        let mut a = NpzArchive::open(path)?;
        let t = SemanticTrajectory {
            maze_layout: a.array::<u8, Ix2>("maze_layout")?,
            agent_pos: a.array::<f32, Ix2>("agent_pos")?,
            agent_dir: a.array::<f32, Ix2>("agent_dir")?,
            targets_vec: a.array::<f32, Ix3>("targets_vec")?,
            reward: a.array::<f32, Ix1>("reward")?,
        };
        let rows = t.reward.len();
        if t.agent_pos.nrows() != rows || t.agent_dir.nrows() != rows || t.targets_vec.shape()[0] != rows {
            return Err(TrajError::Schema("time axes disagree".into()));
        }
        Ok(t)
    }

    pub fn steps(&self) -> usize {
        self.reward.len() - 1
    }
}

impl From<&TrajectoryRecord> for SemanticTrajectory {
    fn from(r: &TrajectoryRecord) -> Self {
        SemanticTrajectory {
            maze_layout: r.maze_layout.clone(),
            agent_pos: r.agent_pos.clone(),
            agent_dir: r.agent_dir.clone(),
            targets_vec: r.targets_vec.clone(),
            reward: r.reward.clone(),
        }
    }
}

/// Accumulates a trajectory one step at a time.
pub struct Recorder {
    n: usize,
    k: usize,
    maze_layout: Vec<u8>,
    image: Vec<u8>,
    action: Vec<u8>,
    reward: Vec<f32>,
    floats: [Vec<f32>; 7],
}

impl Recorder {
    /// Starts from the state before the first action and its rendered frame.
    pub fn new(state: &EnvState, frame: &Frame) -> Self {
        let obs = state.semantic_obs();
        let mut r = Recorder {
            n: obs.layout_size,
            k: obs.targets_pos.len(),
            maze_layout: obs.maze_layout.clone(),
            image: Vec::new(),
            action: Vec::new(),
            reward: Vec::new(),
            floats: Default::default(),
        };
        r.push_row(None, 0.0, &obs, frame);
        r
    }

    /// Appends the state reached by `action`.
    pub fn push(&mut self, action: Action, reward: f32, obs: &SemanticObs, frame: &Frame) {
        self.push_row(Some(action), reward, obs, frame);
    }

    fn push_row(&mut self, action: Option<Action>, reward: f32, obs: &SemanticObs, frame: &Frame) {
        self.image.extend_from_slice(frame.as_bytes());
        let mut hot = [0u8; Action::COUNT];
        if let Some(a) = action {
            hot[a.index()] = 1;
        }
        self.action.extend_from_slice(&hot);
        self.reward.push(reward);
        let f = &mut self.floats;
        f[0].extend(obs.agent_pos.iter().map(|&v| v as f32));
        f[1].extend(obs.agent_dir.iter().map(|&v| v as f32));
        f[2].extend(obs.targets_pos.iter().flatten().map(|&v| v as f32));
        f[3].extend(obs.targets_vec.iter().flatten().map(|&v| v as f32));
        f[4].extend(obs.target_pos.iter().map(|&v| v as f32));
        f[5].extend(obs.target_vec.iter().map(|&v| v as f32));
        f[6].extend(obs.target_color.iter().map(|&v| v as f32));
    }

    /// Number of actions recorded so far.
    pub fn steps(&self) -> usize {
        self.reward.len() - 1
    }

    pub fn finish(self) -> TrajectoryRecord {
        let rows = self.reward.len();
        let [agent_pos, agent_dir, targets_pos, targets_vec, target_pos, target_vec, target_color] = self.floats;
        let shaped = "row lengths are fixed by construction";
        TrajectoryRecord {
            image: Array4::from_shape_vec((rows, FRAME_SIZE, FRAME_SIZE, 3), self.image).expect(shaped),
            action: Array2::from_shape_vec((rows, Action::COUNT), self.action).expect(shaped),
            reward: Array1::from_vec(self.reward),
            maze_layout: Array2::from_shape_vec((self.n, self.n), self.maze_layout).expect(shaped),
            agent_pos: Array2::from_shape_vec((rows, 2), agent_pos).expect(shaped),
            agent_dir: Array2::from_shape_vec((rows, 2), agent_dir).expect(shaped),
            targets_pos: Array3::from_shape_vec((rows, self.k, 2), targets_pos).expect(shaped),
            targets_vec: Array3::from_shape_vec((rows, self.k, 2), targets_vec).expect(shaped),
            target_pos: Array2::from_shape_vec((rows, 2), target_pos).expect(shaped),
            target_vec: Array2::from_shape_vec((rows, 2), target_vec).expect(shaped),
            target_color: Array2::from_shape_vec((rows, 3), target_color).expect(shaped),
        }
    }
}

/// Rolls out the explorer policy for `steps` actions on the maze generated
/// from `seed`. The recorded episode lasts exactly `steps`, whatever the
/// config's episode length.
pub fn record(
    config: &EnvConfig,
    camera: &CameraParams,
    policy: &PolicyConfig,
    seed: u64,
    steps: u32,
) -> Result<TrajectoryRecord, TrajError> {
    if steps == 0 {
        return Err(TrajError::Schema("a trajectory needs at least one step".into()));
    }
    let layout = generate(&config.maze, seed).map_err(SimError::from)?;
    let mut state = EnvState::with_layout(layout.into(), config.sim.clone(), steps, seed);
    let mut explorer =
        ExplorerPolicy::new(policy.clone(), ControllerParams::from_sim(&config.sim), derive_seed(seed, EXPLORER_STREAM, 0));
    let mut renderer = Renderer::new(camera.clone());
    let mut rec = Recorder::new(&state, renderer.render(&state));
    while !state.is_done() {
        let action = explorer.act(&state);
        let out = state.step(action)?;
        rec.push(action, out.reward, &out.semantic, renderer.render(&state));
    }
    Ok(rec.finish())
}

/// Seed and actions of one episode; enough to replay it exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub config: EnvConfig,
    pub seed: u64,
    pub actions: Vec<u8>,
    /// Score reported when the episode was recorded, if any.
    #[serde(default)]
    pub score: Option<u32>,
}

/// Result of re-simulating an [`EpisodeLog`].
#[derive(Clone, Debug, PartialEq)]
pub struct Replay {
    pub rewards: Vec<f32>,
    pub score: u32,
    pub final_obs: SemanticObs,
}

impl EpisodeLog {
    pub fn load(path: &Path) -> Result<Self, TrajError> {
        serde_json::from_slice(&fs::read(path)?).map_err(|e| TrajError::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), TrajError> {
        let json = serde_json::to_vec_pretty(self).map_err(|e| TrajError::Format(e.to_string()))?;
        fs::write(path, json)?;
        Ok(())
    }

    /// Steps a fresh environment through the logged actions.
    pub fn replay(&self) -> Result<Replay, TrajError> {
        let mut state = EnvState::reset(&self.config, self.seed)?;
        let mut rewards = Vec::with_capacity(self.actions.len());
        for &a in &self.actions {
            let (r, _) = state.advance(Action::from_index(a)?)?;
            rewards.push(r);
        }
        Ok(Replay { rewards, score: state.score(), final_obs: state.semantic_obs() })
    }

    /// Replays and records images and semantics along the way.
    pub fn to_record(&self, camera: &CameraParams) -> Result<TrajectoryRecord, TrajError> {
        if self.actions.is_empty() {
            return Err(TrajError::Schema("episode has no actions".into()));
        }
        let mut state = EnvState::reset(&self.config, self.seed)?;
        let mut renderer = Renderer::new(camera.clone());
        let mut rec = Recorder::new(&state, renderer.render(&state));
        for &a in &self.actions {
            let action = Action::from_index(a)?;
            let out = state.step(action)?;
            rec.push(action, out.reward, &out.semantic, renderer.render(&state));
        }
        Ok(rec.finish())
    }
}

/// Rewards per time step of an episode on disk: `reward` of an `.npz`
/// (without the leading zero row) or the replayed rewards of an episode log.
pub fn episode_rewards(path: &Path) -> Result<Vec<f32>, TrajError> {
    if path.extension().is_some_and(|e| e == "npz") {
        let reward = NpzArchive::open(path)?.array::<f32, Ix1>("reward")?;
        Ok(reward.slice(s![1..]).to_vec())
    } else {
        Ok(EpisodeLog::load(path)?.replay()?.rewards)
    }
}

/// Per-tile mean of equally sized binary layouts, e.g. wall frequency.
/// `None` if there are none or their sizes differ.
pub fn layout_frequency<'a>(layouts: impl IntoIterator<Item = &'a Array2<u8>>) -> Option<Array2<f64>> {
    let mut sum: Option<Array2<f64>> = None;
    let mut n = 0usize;
    for l in layouts {
        let l = l.mapv(f64::from);
        sum = Some(match sum {
            Some(s) if s.dim() == l.dim() => s + l,
            Some(_) => return None,
            None => l,
        });
        n += 1;
    }
    sum.map(|s| s / n as f64)
}
