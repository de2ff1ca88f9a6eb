//! Reward collected per 100-step bin by the oracle. The oracle knows the
//! maze from the first step, so after the first bin the profile is flat.
//!
//! `cargo run --release --example reward_profile -- [episodes]`

use memmaze::server::{oracle_rewards, oracle_seed, reward_profile};
use memmaze::{EnvConfig, Preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(50);
    let config = EnvConfig::preset(Preset::Maze9x9);
    let episodes = (0..n).map(|i| oracle_rewards(&config, oracle_seed(0, i))).collect::<Result<Vec<_>, _>>()?;
    let profile = reward_profile(&episodes, 100)?;
    print!("{}", profile.to_csv());
    println!("coefficient of variation, bins 2..10: {:.3}", profile.coefficient_of_variation(1..10));
    Ok(())
}
