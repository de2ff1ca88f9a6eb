//! Probing protocol on freshly recorded trajectories: the constant baseline,
//! a probe on random features and a probe on the noisy true layout.
//!
//! `cargo run --release --example probe_sanity -- [trajectories]`

use memmaze::agents::PolicyConfig;
use memmaze::probe::{probe_train, CheatingReps, ConstantBaseline, ProbeData, ProbeHparams, RandomReps, Task};
use memmaze::trajstore::{record, SemanticTrajectory};
use memmaze::{CameraParams, EnvConfig, Preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(60);
    let config = EnvConfig::preset(Preset::Maze9x9);
    let trajs = (0..n as u64)
        .map(|seed| Ok(SemanticTrajectory::from(&record(&config, &CameraParams::default(), &PolicyConfig::default(), seed, 1000)?)))
        .collect::<Result<Vec<_>, memmaze::trajstore::TrajError>>()?;
    let (train, eval) = trajs.split_at(n - n / 6);

    let baseline = ConstantBaseline::fit(train, Task::Walls)?.evaluate(eval)?;
    println!("constant baseline walls: {:.2}%", baseline.score);

    // A small, short run; the full protocol uses width 1024 and trains to convergence.
    let hp = ProbeHparams { hidden_width: 256, max_steps: 2000, patience: 500, eval_interval: 100, ..Default::default() };
    let random = probe_train(&ProbeData::new(train, &RandomReps { dim: 512, seed: 1 })?, Task::Walls, &hp)?;
    let score = random.evaluate(&ProbeData::new(eval, &RandomReps { dim: 512, seed: 2 })?)?.score;
    println!("random features walls:   {score:.2}%");

    for task in [Task::Walls, Task::Objects] {
        let probe = probe_train(&ProbeData::new(train, &CheatingReps::new(train, task, 0.1, 1))?, task, &hp)?;
        let report = probe.evaluate(&ProbeData::new(eval, &CheatingReps::new(eval, task, 0.1, 2))?)?;
        println!("true state + noise {task}: {:.4}", report.score);
    }
    Ok(())
}
