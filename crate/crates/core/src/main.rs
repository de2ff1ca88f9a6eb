use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use memmaze::agents::PolicyConfig;
use memmaze::config::Overrides;
use memmaze::probe::{
    curve_csv, probe_train, CheatingReps, ConstantBaseline, ProbeData, ProbeHparams, RandomReps, RepMatrices, RepresentationSource,
    Task, TrainedProbe, VisibilityReps,
};
use memmaze::server::{oracle_bench, oracle_rewards, oracle_seed, reward_profile, Server, ServerConfig};
use memmaze::trajstore::{episode_rewards, generate_dataset, verify_dataset, DatasetManifest, DatasetSpec, EpisodeLog, SemanticTrajectory};
use memmaze::{EnvConfig, Preset};

const ADDR_ENV: &str = "MEMMAZE_ADDR";
const DEFAULT_ADDR: &str = "127.0.0.1:7878";

#[derive(Parser)]
#[command(name = "memmaze", version, about = "Memory maze environment, datasets and probes")]
struct Cli {
    /// JSON file overriding kinematics and camera constants.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Record explorer trajectories into train/ and eval/ splits.
    GenDataset(GenDataset),
    /// Mean oracle score per preset.
    OracleBench(OracleBench),
    /// Session server over TCP and WebSocket.
    Serve(Serve),
    /// Train a probe on a dataset split.
    ProbeTrain(ProbeTrain),
    /// Score a trained probe or the constant baseline.
    ProbeEval(ProbeEval),
    /// Reward per 100-step bin over recorded or oracle episodes.
    RewardProfile(RewardProfileArgs),
    /// Re-simulate a recorded episode.
    Replay(Replay),
}

#[derive(Args)]
struct GenDataset {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 9)]
    size: usize,
    #[arg(long, default_value_t = 500)]
    train: usize,
    #[arg(long, default_value_t = 50)]
    eval: usize,
    /// Steps per trajectory; defaults to the preset's episode length.
    #[arg(long)]
    steps: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value_t = 0.1)]
    action_noise: f64,
}

#[derive(Args)]
struct OracleBench {
    /// Maze size; omit to run every preset.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for one `oracle-<size>.csv` score histogram per preset.
    #[arg(long)]
    histogram_dir: Option<PathBuf>,
}

#[derive(Args)]
struct Serve {
    /// Listen address; defaults to $MEMMAZE_ADDR, then 127.0.0.1:7878.
    #[arg(long)]
    addr: Option<String>,
    /// Serve the browser play page and record finished play episodes.
    #[arg(long)]
    play: bool,
    #[arg(long, default_value = "recordings")]
    record_dir: PathBuf,
    /// Minimum milliseconds between steps in play mode.
    #[arg(long, default_value_t = 250)]
    tick_ms: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum RepKind {
    /// Standard normal noise.
    Random,
    /// Probe target plus noise.
    Cheating,
    /// Tiles seen in the current frame.
    Visibility,
    /// Tiles seen so far in the episode.
    Memory,
    /// `rep` arrays read from --rep-dir, one file per trajectory.
    Files,
}

#[derive(Args)]
struct RepArgs {
    /// Dataset root written by gen-dataset.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "random")]
    rep: RepKind,
    /// Width of random representations.
    #[arg(long, default_value_t = 2048)]
    rep_dim: usize,
    /// Noise level of cheating representations.
    #[arg(long, default_value_t = 0.1)]
    rep_noise: f32,
    #[arg(long, default_value_t = 1)]
    rep_seed: u64,
    /// Root mirroring the dataset layout, for `--rep files`.
    #[arg(long)]
    rep_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeTrain {
    #[command(flatten)]
    reps: RepArgs,
    #[arg(long, default_value = "walls")]
    task: Task,
    #[arg(long)]
    out: PathBuf,
    /// JSON file with probe hyperparameters; missing keys keep defaults.
    #[arg(long)]
    hparams: Option<PathBuf>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
}

#[derive(Args)]
struct ProbeEval {
    #[command(flatten)]
    reps: RepArgs,
    /// Trained probe; omit to score the constant baseline fitted on train.
    #[arg(long)]
    probe: Option<PathBuf>,
    #[arg(long, default_value = "walls")]
    task: Task,
    #[arg(long, default_value = "eval")]
    split: String,
    /// Write the per-step metric curve as CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    curve_stride: usize,
}

#[derive(Args)]
struct RewardProfileArgs {
    /// Recorded episodes (.npz trajectories or .json logs) or directories of them.
    episodes: Vec<PathBuf>,
    /// Profile this many fresh oracle episodes instead.
    #[arg(long)]
    oracle: Option<usize>,
    #[arg(long, default_value_t = 9)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    bin: usize,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Replay {
    /// Episode log (.json) as written by play mode.
    #[arg(long)]
    episode: PathBuf,
    /// Also write the re-rendered trajectory as .npz.
    #[arg(long)]
    npz: Option<PathBuf>,
}

fn preset(size: usize) -> Result<Preset> {
    Preset::from_size(size).with_context(|| format!("no {size}x{size} preset (use 9, 11, 13 or 15)"))
}

fn env_config(size: usize, overrides: &Overrides) -> Result<EnvConfig> {
    Ok(EnvConfig { maze: preset(size)?.config(), sim: overrides.sim.clone() })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let overrides = match &cli.config {
        Some(p) => Overrides::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => Overrides::default(),
    };
    match cli.command {
        Command::GenDataset(a) => gen_dataset(a, &overrides),
        Command::OracleBench(a) => bench(a, &overrides),
        Command::Serve(a) => serve(a, &overrides),
        Command::ProbeTrain(a) => train(a),
        Command::ProbeEval(a) => eval(a),
        Command::RewardProfile(a) => profile(a, &overrides),
        Command::Replay(a) => replay(a, &overrides),
    }
}

fn gen_dataset(a: GenDataset, o: &Overrides) -> Result<()> {
    let env = env_config(a.size, o)?;
    let spec = DatasetSpec {
        steps: a.steps.unwrap_or(env.maze.episode_length),
        env,
        camera: o.camera.clone(),
        policy: PolicyConfig { action_noise: a.action_noise, ..Default::default() },
        n_train: a.train,
        n_eval: a.eval,
        master_seed: a.seed,
    };
    let start = Instant::now();
    let manifest = generate_dataset(&spec, &a.out, a.threads)?;
    verify_dataset(&a.out, false)?;
    println!(
        "wrote {} train + {} eval trajectories of {} steps to {} in {:.1}s",
        manifest.train.count,
        manifest.eval.count,
        spec.steps,
        a.out.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn bench(a: OracleBench, o: &Overrides) -> Result<()> {
    let sizes = match a.size {
        Some(s) => vec![s],
        None => Preset::ALL.iter().map(|p| p.size()).collect(),
    };
    for size in sizes {
        let start = Instant::now();
        let report = oracle_bench(preset(size)?, &env_config(size, o)?, a.episodes, a.seed)?;
        println!("{report} [{:.1}s]", start.elapsed().as_secs_f64());
        if let Some(dir) = &a.histogram_dir {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(format!("oracle-{size}.csv")), report.histogram_csv())?;
        }
    }
    Ok(())
}

fn serve(a: Serve, o: &Overrides) -> Result<()> {
    let addr = a.addr.or_else(|| std::env::var(ADDR_ENV).ok()).unwrap_or_else(|| DEFAULT_ADDR.to_string());
    let config = ServerConfig {
        sim: o.sim.clone(),
        camera: o.camera.clone(),
        play_tick: Duration::from_millis(a.tick_ms),
        record_dir: a.play.then(|| a.record_dir.clone()),
        serve_page: a.play,
        ..Default::default()
    };
    let server = Server::bind(&addr, config).with_context(|| format!("binding {addr}"))?;
    let bound = server.local_addr()?;
    if a.play {
        println!("play at http://{bound}/ (episodes recorded to {})", a.record_dir.display());
    }
    println!("listening on {bound}");
    server.run()?;
    Ok(())
}

struct Loaded {
    trajs: Vec<SemanticTrajectory>,
    names: Vec<String>,
}

fn load_split(root: &Path, split: &str) -> Result<Loaded> {
    let manifest = DatasetManifest::load(root).with_context(|| format!("reading manifest in {}", root.display()))?;
    let names = manifest.split(split).with_context(|| format!("no split {split}"))?.files.iter().map(|f| f.file.clone()).collect();
    Ok(Loaded { trajs: manifest.load_semantic(root, split)?, names })
}

fn rep_source<'a>(r: &RepArgs, data: &'a Loaded, task: Task, seed_offset: u64) -> Result<Box<dyn RepresentationSource + 'a>> {
    let camera = DatasetManifest::load(&r.data)?.spec.camera;
    Ok(match r.rep {
        RepKind::Random => Box::new(RandomReps { dim: r.rep_dim, seed: r.rep_seed + seed_offset }),
        RepKind::Cheating => Box::new(CheatingReps::new(&data.trajs, task, r.rep_noise, r.rep_seed + seed_offset)),
        RepKind::Visibility => Box::new(VisibilityReps::new(&data.trajs, &camera, false)),
        RepKind::Memory => Box::new(VisibilityReps::new(&data.trajs, &camera, true)),
        RepKind::Files => {
            let dir = r.rep_dir.as_ref().context("--rep files needs --rep-dir")?;
            Box::new(RepMatrices::load(dir, &data.names)?)
        }
    })
}

fn train(a: ProbeTrain) -> Result<()> {
    let mut hp: ProbeHparams = match &a.hparams {
        Some(p) => serde_json::from_slice(&fs::read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => ProbeHparams::default(),
    };
    if let Some(m) = a.max_steps {
        hp.max_steps = m;
    }
    if let Some(p) = a.patience {
        hp.patience = p;
    }
    let data = load_split(&a.reps.data, "train")?;
    let reps = rep_source(&a.reps, &data, a.task, 0)?;
    let start = Instant::now();
    let probe = probe_train(&ProbeData::new(&data.trajs, reps.as_ref())?, a.task, &hp)?;
    probe.save(&a.out)?;
    println!(
        "{} probe: {} steps (best {}), {:.1}s, saved to {}",
        a.task,
        probe.steps_run,
        probe.best_step,
        start.elapsed().as_secs_f64(),
        a.out.display()
    );
    Ok(())
}

fn eval(a: ProbeEval) -> Result<()> {
    let data = load_split(&a.reps.data, &a.split)?;
    let report = match &a.probe {
        None => {
            let train = load_split(&a.reps.data, "train")?;
            ConstantBaseline::fit(&train.trajs, a.task)?.evaluate(&data.trajs)?
        }
        Some(path) => {
            let probe = TrainedProbe::load(path)?;
            if probe.task != a.task {
                bail!("probe was trained for {}, not {}", probe.task, a.task);
            }
            // Held-out representations get their own noise stream.
            let reps = rep_source(&a.reps, &data, a.task, 1)?;
            let pd = ProbeData::new(&data.trajs, reps.as_ref())?;
            if let Some(out) = &a.curve {
                fs::write(out, curve_csv(&probe.per_step_curve(&pd, a.curve_stride)?))?;
            }
            probe.evaluate(&pd)?
        }
    };
    let unit = if a.task == Task::Walls { "% accuracy" } else { " MSE" };
    println!("{} on {} ({} trajectories): {:.4}{unit}", a.task, a.split, data.trajs.len(), report.score);
    Ok(())
}

fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            files.retain(|f| f.extension().is_some_and(|e| e == "npz" || e == "json"));
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn profile(a: RewardProfileArgs, o: &Overrides) -> Result<()> {
    let episodes: Vec<Vec<f32>> = match a.oracle {
        Some(n) => {
            let config = env_config(a.size, o)?;
            (0..n).map(|i| oracle_rewards(&config, oracle_seed(a.seed, i))).collect::<Result<_, _>>()?
        }
        None => expand(&a.episodes)?
            .iter()
            .map(|p| episode_rewards(p).with_context(|| format!("reading {}", p.display())))
            .collect::<Result<_>>()?,
    };
    let profile = reward_profile(&episodes, a.bin)?;
    let csv = profile.to_csv();
    match &a.out {
        Some(p) => fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    if profile.means.len() > 2 {
        eprintln!("coefficient of variation after the first bin: {:.3}", profile.coefficient_of_variation(1..profile.means.len()));
    }
    Ok(())
}

fn replay(a: Replay, o: &Overrides) -> Result<()> {
    let log = EpisodeLog::load(&a.episode).with_context(|| format!("reading {}", a.episode.display()))?;
    let r = log.replay()?;
    println!("{} actions, score {}", log.actions.len(), r.score);
    if let Some(recorded) = log.score {
        if recorded != r.score {
            bail!("recorded score {recorded} but replay scored {}", r.score);
        }
        println!("matches recorded score");
    }
    if let Some(out) = &a.npz {
        log.to_record(&o.camera)?.save(out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
