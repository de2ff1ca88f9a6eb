//! Plays full oracle episodes on every preset and compares the mean score
//! with the reference numbers.
//!
//! `cargo run --release --example oracle_episode -- [episodes]`

use memmaze::server::oracle_bench;
use memmaze::{EnvConfig, Preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let episodes: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    for preset in Preset::ALL {
        let report = oracle_bench(preset, &EnvConfig::preset(preset), episodes, 0)?;
        println!("{report}");
    }
    Ok(())
}
