//! Spins the agent in place at its spawn point and saves the 16 first-person
//! frames as PNGs, plus the top-down view.
//!
//! `cargo run --release --example first_person_frames -- [out_dir]`

use std::path::PathBuf;

use memmaze::render::{render_top_down, Renderer};
use memmaze::sim::{Action, EnvState};
use memmaze::{EnvConfig, Preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "frames".into()));
    std::fs::create_dir_all(&out)?;
    let mut env = EnvState::reset(&EnvConfig::preset(Preset::Maze9x9), 3)?;
    let mut renderer = Renderer::default();
    render_top_down(&env, 16).save(out.join("top_down.png"))?;
    for i in 0..16 {
        renderer.render(&env).save_png(&out.join(format!("view_{i:02}.png")))?;
        env.step(Action::TurnRight)?;
    }
    println!("wrote 17 images to {}", out.display());
    Ok(())
}
