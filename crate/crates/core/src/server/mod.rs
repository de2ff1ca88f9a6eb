//! Remote stepping: the session protocol over TCP and WebSocket, a batched
//! environment driver, and the oracle and reward-profile measurements.

mod batch;
mod bench;
mod net;
pub mod protocol;
mod session;

pub use batch::{lane_seed, BatchError, BatchedEnv, LaneResult};
pub use bench::{oracle_bench, oracle_rewards, oracle_seed, reward_profile, OracleReport, ProfileError, RewardProfile};
pub use net::{serve_tcp, Client, Server, PLAY_PAGE};
pub use protocol::{ClientMessage, ErrorCode, FrameMessage, ServerMessage, TopDown};
pub use session::{ServerConfig, Session};
