//! Frozen representations fed to the probe, one `D`-vector per step.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Ix2};

use super::Task;
use crate::config::CameraParams;
use crate::grid::{Cell, WallGrid};
use crate::render::visible_cells;
use crate::rng::{derive_seed, mix64};
use crate::trajstore::{npy, NpzArchive, SemanticTrajectory, TrajError};

/// Entry name inside a representation file.
pub const REP_KEY: &str = "rep";

/// Representation of step `step` of trajectory `traj` in a fixed list.
pub trait RepresentationSource: Sync {
    fn dim(&self) -> usize;
    fn write(&self, traj: usize, step: usize, out: &mut [f32]);
}

/// Representations held in memory, one `(T + 1, D)` matrix per trajectory.
pub struct RepMatrices {
    pub reps: Vec<Array2<f32>>,
}

impl RepMatrices {
    pub fn new(reps: Vec<Array2<f32>>) -> Result<Self, TrajError> {
        let dims: Vec<usize> = reps.iter().map(|r| r.ncols()).collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(TrajError::Schema(format!("representation widths differ: {dims:?}")));
        }
        Ok(RepMatrices { reps })
    }

    /// Loads `dir/<name>` for each name, e.g. `train/000000.npz`.
    pub fn load(dir: &Path, names: &[String]) -> Result<Self, TrajError> {
        let reps = names
            .iter()
            .map(|n| NpzArchive::open(&dir.join(n))?.array::<f32, Ix2>(REP_KEY))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(reps)
    }
}

/// Writes one representation file.
pub fn save_rep(path: &Path, rep: &Array2<f32>) -> Result<(), TrajError> {
    use std::io::Write;
    use zip::write::SimpleFileOptions;
    let mut zip = zip::ZipWriter::new(std::io::Cursor::new(Vec::new()));
    let options = SimpleFileOptions::default()
        .compression_method(zip::CompressionMethod::Stored)
        .last_modified_time(zip::DateTime::default());
    zip.start_file(format!("{REP_KEY}.npy"), options)?;
    zip.write_all(&npy::to_npy_bytes(rep.view()))?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, zip.finish()?.into_inner())?;
    Ok(())
}

impl RepresentationSource for RepMatrices {
    fn dim(&self) -> usize {
        self.reps.first().map_or(0, |r| r.ncols())
    }

    fn write(&self, traj: usize, step: usize, out: &mut [f32]) {
        out.copy_from_slice(self.reps[traj].row(step).as_slice().expect("standard layout"));
    }
}

/// Fills `out` with standard normal values determined by `key`.
fn gaussian_fill(key: u64, out: &mut [f32]) {
    let unit = |bits: u64| ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    for (j, pair) in out.chunks_mut(2).enumerate() {
        let a = mix64(key ^ (2 * j as u64));
        let b = mix64(key ^ (2 * j as u64 + 1));
        let r = (-2.0 * unit(a).ln()).sqrt();
        let theta = std::f64::consts::TAU * unit(b);
        pair[0] = (r * theta.cos()) as f32;
        if let Some(second) = pair.get_mut(1) {
            *second = (r * theta.sin()) as f32;
        }
    }
}

/// Independent standard normal vectors for every step: carries no
/// information about the maze.
pub struct RandomReps {
    pub dim: usize,
    pub seed: u64,
}

impl RepresentationSource for RandomReps {
    fn dim(&self) -> usize {
        self.dim
    }

    fn write(&self, traj: usize, step: usize, out: &mut [f32]) {
        gaussian_fill(derive_seed(self.seed, traj as u64, step as u64), out);
    }
}

/// The probe target itself plus Gaussian noise of standard deviation
/// `noise`: the wall layout for walls, agent-centric object positions for
/// objects.
pub struct CheatingReps<'a> {
    trajs: &'a [SemanticTrajectory],
    task: Task,
    noise: f32,
    seed: u64,
    dim: usize,
}

impl<'a> CheatingReps<'a> {
    pub fn new(trajs: &'a [SemanticTrajectory], task: Task, noise: f32, seed: u64) -> Self {
        let dim = trajs.first().map_or(0, |t| task.output_width(t.maze_layout.nrows(), t.targets_vec.shape()[1]));
        CheatingReps { trajs, task, noise, seed, dim }
    }
}

impl RepresentationSource for CheatingReps<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn write(&self, traj: usize, step: usize, out: &mut [f32]) {
        let t = &self.trajs[traj];
        gaussian_fill(derive_seed(self.seed, traj as u64, step as u64), out);
        let exact: Box<dyn Iterator<Item = f32>> = match self.task {
            Task::Walls => Box::new(t.maze_layout.iter().map(|&v| v as f32)),
            Task::Objects => Box::new(t.targets_vec.slice(ndarray::s![step, .., ..]).into_iter().copied()),
        };
        for (o, v) in out.iter_mut().zip(exact) {
            *o = v + self.noise * *o;
        }
    }
}

/// Wall grid with border ring around an `N x N` layout.
pub fn walls_from_layout(layout: &Array2<u8>) -> WallGrid {
    let n = layout.nrows();
    let mut walls = WallGrid::filled(n + 2, true);
    for ((r, c), &v) in layout.indexed_iter() {
        walls.set(Cell::new(r as i32 + 1, c as i32 + 1), v != 0);
    }
    walls
}

/// Per-step tile observations: two channels per layout tile, "seen as
/// wall" and "seen as floor". With `memory` the channels accumulate over
/// the trajectory; without it they only describe the current view.
pub struct VisibilityReps {
    codes: Vec<Vec<u8>>,
    tiles: usize,
    memory: bool,
}

const SEEN_WALL: u8 = 1;
const SEEN_FLOOR: u8 = 2;

impl VisibilityReps {
    pub fn new(trajs: &[SemanticTrajectory], camera: &CameraParams, memory: bool) -> Self {
        let tiles = trajs.first().map_or(0, |t| t.maze_layout.len());
        let codes = trajs
            .iter()
            .map(|t| {
                let n = t.maze_layout.nrows();
                let walls = walls_from_layout(&t.maze_layout);
                let mut codes = vec![0u8; t.agent_pos.nrows() * n * n];
                for (step, chunk) in codes.chunks_mut(n * n).enumerate() {
                    let p = t.agent_pos.row(step);
                    let d = t.agent_dir.row(step);
                    let (dx, dy) = (d[0] as f64, d[1] as f64);
                    let norm = dx.hypot(dy);
                    let mask = visible_cells(
                        &walls,
                        [p[0] as f64 + 1.0, p[1] as f64 + 1.0],
                        [dx / norm, dy / norm],
                        camera.half_fov_tan(),
                        64,
                    );
                    for r in 0..n {
                        for c in 0..n {
                            if mask[(r + 1) * (n + 2) + c + 1] {
                                chunk[r * n + c] = if t.maze_layout[[r, c]] != 0 { SEEN_WALL } else { SEEN_FLOOR };
                            }
                        }
                    }
                }
                if memory {
                    for step in 1..t.agent_pos.nrows() {
                        let (prev, cur) = codes.split_at_mut(step * n * n);
                        for (c, &p) in cur[..n * n].iter_mut().zip(&prev[(step - 1) * n * n..]) {
                            *c |= p;
                        }
                    }
                }
                codes
            })
            .collect();
        VisibilityReps { codes, tiles, memory }
    }

    pub fn is_memory(&self) -> bool {
        self.memory
    }

    /// Fraction of tiles seen at `step`, averaged over trajectories.
    pub fn seen_fraction(&self, step: usize) -> f64 {
        let seen: usize = self.codes.iter().map(|c| c[step * self.tiles..(step + 1) * self.tiles].iter().filter(|&&v| v != 0).count()).sum();
        seen as f64 / (self.tiles * self.codes.len()) as f64
    }
}

impl RepresentationSource for VisibilityReps {
    fn dim(&self) -> usize {
        2 * self.tiles
    }

    fn write(&self, traj: usize, step: usize, out: &mut [f32]) {
        let codes = &self.codes[traj][step * self.tiles..(step + 1) * self.tiles];
        for (pair, &c) in out.chunks_mut(2).zip(codes) {
            pair[0] = (c & SEEN_WALL != 0) as u8 as f32;
            pair[1] = (c & SEEN_FLOOR != 0) as u8 as f32;
        }
    }
}
