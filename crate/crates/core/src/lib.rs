//! Memory-maze environment and benchmark harness.
//!
//! - [`mazegen`]: seeded room-and-corridor layouts
//! - [`sim`]: the scavenger-hunt environment (pose, collision, rewards)
//! - [`render`]: 64x64 first-person raycaster and top-down maps
//! - [`agents`]: BFS planning, explorer and oracle policies
//! - [`trajstore`]: trajectory recording, NPZ files and datasets

pub mod agents;
pub mod config;
pub mod grid;
pub mod mazegen;
pub mod render;
pub mod rng;
pub mod probe;
pub mod server;
pub mod sim;
pub mod trajstore;

pub use config::{CameraParams, EnvConfig, MazeConfig, Preset, SimParams};
pub use grid::{Cell, WallGrid};
pub use mazegen::{generate, MazeLayout};
pub use sim::{Action, AgentPose, EnvState, SemanticObs, StepOutcome};
