//! Environment configuration: maze presets, kinematics and camera constants.

use std::path::Path;

use serde::{Deserialize, Serialize};

/// Inclusive integer interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
}

impl IntRange {
    pub const fn new(min: usize, max: usize) -> Self {
        IntRange { min, max }
    }

    pub fn contains(&self, v: usize) -> bool {
        self.min <= v && v <= self.max
    }
}

/// Loop probability used by the presets.
pub const LOOP_PROBABILITY: f64 = 0.1;

/// Maze and episode parameters.
///
/// `grid_size` is the side of the walkable interior; the generated wall grid
/// adds a one-cell border ring around it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MazeConfig {
    pub grid_size: usize,
    pub n_objects: usize,
    pub room_count: IntRange,
    /// Room side length in interior floor cells.
    pub room_size: IntRange,
    pub episode_length: u32,
    /// Chance that a lattice edge left out of the spanning tree is opened
    /// anyway, adding a loop.
    #[serde(default)]
    pub loop_probability: f64,
}

/// The four standard maze sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    Maze9x9,
    Maze11x11,
    Maze13x13,
    Maze15x15,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Maze9x9, Preset::Maze11x11, Preset::Maze13x13, Preset::Maze15x15];

    pub fn from_size(size: usize) -> Option<Preset> {
        match size {
            9 => Some(Preset::Maze9x9),
            11 => Some(Preset::Maze11x11),
            13 => Some(Preset::Maze13x13),
            15 => Some(Preset::Maze15x15),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            Preset::Maze9x9 => 9,
            Preset::Maze11x11 => 11,
            Preset::Maze13x13 => 13,
            Preset::Maze15x15 => 15,
        }
    }

    pub fn config(self) -> MazeConfig {
        let (grid_size, n_objects, rooms, sizes, episode_length) = match self {
            Preset::Maze9x9 => (9, 3, (3, 4), (3, 5), 1000),
            Preset::Maze11x11 => (11, 4, (4, 6), (3, 5), 2000),
            Preset::Maze13x13 => (13, 5, (5, 6), (3, 5), 3000),
            Preset::Maze15x15 => (15, 6, (9, 9), (3, 3), 4000),
        };
        MazeConfig {
            grid_size,
            n_objects,
            room_count: IntRange::new(rooms.0, rooms.1),
            room_size: IntRange::new(sizes.0, sizes.1),
            episode_length,
            loop_probability: LOOP_PROBABILITY,
        }
    }

    /// Mean oracle score per episode reported for the original environment.
    pub fn reference_oracle_score(self) -> f64 {
        match self {
            Preset::Maze9x9 => 34.8,
            Preset::Maze11x11 => 58.0,
            Preset::Maze13x13 => 74.5,
            Preset::Maze15x15 => 87.7,
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{0}x{0}", self.size())
    }
}

/// Per-step agent kinematics and task geometry, in cell units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    /// Distance moved by a forward action. Calibrated on the 9x9 oracle score.
    pub forward_speed: f64,
    /// Heading change of a turn action, degrees.
    pub turn_rate_deg: f64,
    pub agent_radius: f64,
    /// Center-to-center distance below which the agent touches an object.
    pub touch_radius: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams { forward_speed: 0.55, turn_rate_deg: 22.5, agent_radius: 0.2, touch_radius: 0.6 }
    }
}

impl SimParams {
    pub fn turn_rate(&self) -> f64 {
        self.turn_rate_deg.to_radians()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraParams {
    pub horizontal_fov_deg: f64,
    pub eye_height: f64,
    pub near_clip: f64,
    pub wall_height: f64,
}

impl Default for CameraParams {
    fn default() -> Self {
        CameraParams { horizontal_fov_deg: 90.0, eye_height: 0.5, near_clip: 0.05, wall_height: 1.0 }
    }
}

impl CameraParams {
    /// `tan(fov / 2)`.
    pub fn half_fov_tan(&self) -> f64 {
        (self.horizontal_fov_deg.to_radians() / 2.0).tan()
    }
}

/// Everything needed to reset an environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub maze: MazeConfig,
    #[serde(default)]
    pub sim: SimParams,
}

impl EnvConfig {
    pub fn preset(preset: Preset) -> Self {
        EnvConfig { maze: preset.config(), sim: SimParams::default() }
    }
}

/// Optional JSON overrides for kinematics and render constants.
///
/// ```json
/// { "sim": { "forward_speed": 0.3 }, "camera": { "horizontal_fov_deg": 75 } }
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Overrides {
    pub sim: SimParams,
    pub camera: CameraParams,
}

impl Overrides {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}
