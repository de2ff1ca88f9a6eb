//! Records a small offline dataset with the exploration policy, verifies it
//! and prints the shapes stored for the first trajectory.
//!
//! `cargo run --release --example record_dataset -- [out_dir]`

use std::path::PathBuf;

use memmaze::agents::PolicyConfig;
use memmaze::trajstore::{generate_dataset, verify_dataset, DatasetSpec, TrajectoryRecord};
use memmaze::{CameraParams, EnvConfig, Preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "dataset".into()));
    let spec = DatasetSpec {
        env: EnvConfig::preset(Preset::Maze9x9),
        camera: CameraParams::default(),
        policy: PolicyConfig::default(),
        steps: 1000,
        n_train: 16,
        n_eval: 4,
        master_seed: 0,
    };
    let manifest = generate_dataset(&spec, &root, 0)?;
    verify_dataset(&root, true)?;
    let first = TrajectoryRecord::load(&root.join(&manifest.train.files[0].file))?;
    first.validate()?;
    for (key, shape) in first.shapes() {
        println!("{key:>14} {shape:?}");
    }
    let scores: Vec<u32> = manifest.train.files.iter().map(|f| f.score).collect();
    println!("train scores {scores:?}");
    Ok(())
}
