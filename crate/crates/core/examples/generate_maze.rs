//! Generates one layout per preset, prints it as ASCII and writes a
//! top-down PNG of each into the current directory.
//!
//! `cargo run --release --example generate_maze -- [seed]`

use memmaze::mazegen::generate;
use memmaze::render::{render_layout_top_down, TopDownStyle};
use memmaze::Preset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    for preset in Preset::ALL {
        let config = preset.config();
        let layout = generate(&config, seed)?;
        layout.validate(&config)?;
        println!("{preset}: {} rooms, objects at {:?}", layout.rooms.len(), layout.object_cells);
        println!("{}", layout.walls.to_ascii());
        let path = format!("maze_{}.png", preset.size());
        render_layout_top_down(&layout, 16, &TopDownStyle::default()).save(&path)?;
        println!("wrote {path}\n");
    }
    Ok(())
}
