//! Scripted agents: grid planning, waypoint following, the noisy explorer
//! used for dataset collection, and the full-information oracle.

mod bfs;
mod controller;
mod explorer;
mod oracle;

pub use bfs::{bfs_distances, bfs_path, PlanError, PlanPath};
pub use controller::{heading_error, waypoint_action, ControllerParams};
pub use explorer::{ExplorerPolicy, PolicyConfig};
pub use oracle::OraclePolicy;
