//! Saves an action log of a noisy oracle episode, replays it from disk and
//! checks that the rewards and final state come back identical.
//!
//! `cargo run --release --example replay_episode`

use memmaze::agents::OraclePolicy;
use memmaze::rng::mix64;
use memmaze::sim::{Action, EnvState};
use memmaze::trajstore::EpisodeLog;
use memmaze::{EnvConfig, Preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = EnvConfig::preset(Preset::Maze9x9);
    let seed = 17;
    let mut env = EnvState::reset(&config, seed)?;
    let oracle = OraclePolicy::default();
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    while !env.is_done() {
        let step = env.step_count() as u64;
        let a = if mix64(step) % 5 == 0 { Action::ALL[(mix64(step + 1) % 6) as usize] } else { oracle.act(&env) };
        rewards.push(env.step(a)?.reward);
        actions.push(a.index() as u8);
    }
    let log = EpisodeLog { config, seed, actions, score: Some(env.score()) };
    let path = std::env::temp_dir().join("memmaze_replay_example.json");
    log.save(&path)?;

    let replay = EpisodeLog::load(&path)?.replay()?;
    assert_eq!(replay.rewards, rewards);
    assert_eq!(replay.final_obs, env.semantic_obs());
    println!("score {} reproduced from {} logged actions ({})", replay.score, log.actions.len(), path.display());
    Ok(())
}
