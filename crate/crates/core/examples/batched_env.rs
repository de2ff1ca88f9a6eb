//! Steps 64 environments in lockstep with random actions and reports
//! throughput with and without rendering.
//!
//! `cargo run --release --example batched_env`

use std::time::Instant;

use memmaze::rng::mix64;
use memmaze::server::BatchedEnv;
use memmaze::{CameraParams, EnvConfig, Preset};

fn run(camera: Option<CameraParams>, steps: usize) -> Result<f64, Box<dyn std::error::Error>> {
    let mut env = BatchedEnv::new(EnvConfig::preset(Preset::Maze9x9), 64, 0, camera)?;
    let mut actions = vec![0u8; env.len()];
    let mut finished = 0;
    let start = Instant::now();
    for t in 0..steps {
        for (i, a) in actions.iter_mut().enumerate() {
            *a = (mix64((t * 64 + i) as u64) % 6) as u8;
        }
        finished += env.batch_step(&actions)?.iter().filter(|r| r.done).count();
    }
    let rate = (steps * env.len()) as f64 / start.elapsed().as_secs_f64();
    println!("  {finished} episodes finished");
    Ok(rate)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("no rendering: {:.0} env-steps/s", run(None, 2000)?);
    println!("rendered:     {:.0} env-steps/s", run(Some(CameraParams::default()), 200)?);
    Ok(())
}
