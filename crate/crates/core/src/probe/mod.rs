//! Offline probing: a fixed MLP decodes the wall layout or agent-centric
//! object positions from frozen per-step representations, concatenated
//! with the agent position and heading.
//!
//! Scores average over steps `T/2..=T` of every evaluation trajectory.
//! Walls: fraction of tiles classified correctly, logit >= 0 meaning wall.
//! Objects: squared Euclidean error per object, averaged over objects.

pub mod mlp;
pub mod reps;

use std::fmt;
use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView2, Ix1, Ix2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mlp::{Adam, Mlp};
pub use reps::{CheatingReps, RandomReps, RepMatrices, RepresentationSource, VisibilityReps};

use crate::rng::rng_from_seed;
use crate::trajstore::{npy, NpzArchive, SemanticTrajectory, TrajError};

/// Position (2) and heading (2) appended to every representation.
pub const POSE_INPUTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Walls,
    Objects,
}

impl Task {
    pub fn output_width(self, layout_size: usize, n_objects: usize) -> usize {
        match self {
            Task::Walls => layout_size * layout_size,
            Task::Objects => 2 * n_objects,
        }
    }

    /// True when larger metric values are better.
    pub fn higher_is_better(self) -> bool {
        self == Task::Walls
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Walls => "walls",
            Task::Objects => "objects",
        })
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "walls" => Ok(Task::Walls),
            "objects" => Ok(Task::Objects),
            other => Err(format!("unknown task {other:?} (walls|objects)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeHparams {
    pub learning_rate: f64,
    pub adam_eps: f64,
    pub ln_eps: f64,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub batch_size: usize,
    /// Hard cap on gradient steps.
    pub max_steps: usize,
    /// Stop once the validation metric has not improved for this many steps.
    pub patience: usize,
    /// Steps between validation checks.
    pub eval_interval: usize,
    /// Share of training trajectories held out for early stopping.
    pub val_fraction: f64,
    /// `(trajectory, step)` pairs in the validation sample.
    pub val_samples: usize,
    pub seed: u64,
    pub zero_head: bool,
}

impl Default for ProbeHparams {
    fn default() -> Self {
        ProbeHparams {
            learning_rate: 3e-4,
            adam_eps: 1e-5,
            ln_eps: 1e-3,
            hidden_layers: 4,
            hidden_width: 1024,
            batch_size: 128,
            max_steps: 1_000_000,
            patience: 5_000,
            eval_interval: 500,
            val_fraction: 0.1,
            val_samples: 4096,
            seed: 0,
            zero_head: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("input width {got}, model expects {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("non-finite loss {loss} at step {step}: {detail}")]
    NonFiniteLoss { step: usize, loss: f64, detail: String },
    #[error("bad probe data: {0}")]
    Data(String),
    #[error(transparent)]
    Traj(#[from] TrajError),
}

/// Trajectories with their aligned representations.
#[derive(Clone, Copy)]
pub struct ProbeData<'a> {
    pub trajs: &'a [SemanticTrajectory],
    pub reps: &'a dyn RepresentationSource,
}

impl<'a> ProbeData<'a> {
    pub fn new(trajs: &'a [SemanticTrajectory], reps: &'a dyn RepresentationSource) -> Result<Self, ProbeError> {
        let first = trajs.first().ok_or_else(|| ProbeError::Data("no trajectories".into()))?;
        let (n, k) = (first.maze_layout.nrows(), first.targets_vec.shape()[1]);
        for (i, t) in trajs.iter().enumerate() {
            if t.maze_layout.nrows() != n || t.targets_vec.shape()[1] != k {
                return Err(ProbeError::Data(format!("trajectory {i} has a different layout size or object count")));
            }
            if t.steps() < 1 {
                return Err(ProbeError::Data(format!("trajectory {i} is empty")));
            }
        }
        if reps.dim() == 0 {
            return Err(ProbeError::Data("zero-width representation".into()));
        }
        Ok(ProbeData { trajs, reps })
    }

    pub fn layout_size(&self) -> usize {
        self.trajs[0].maze_layout.nrows()
    }

    pub fn n_objects(&self) -> usize {
        self.trajs[0].targets_vec.shape()[1]
    }

    pub fn input_width(&self) -> usize {
        self.reps.dim() + POSE_INPUTS
    }

    pub fn output_width(&self, task: Task) -> usize {
        task.output_width(self.layout_size(), self.n_objects())
    }

    fn fill_input(&self, traj: usize, step: usize, row: &mut [f32]) {
        let d = self.reps.dim();
        self.reps.write(traj, step, &mut row[..d]);
        let t = &self.trajs[traj];
        row[d] = t.agent_pos[[step, 0]];
        row[d + 1] = t.agent_pos[[step, 1]];
        row[d + 2] = t.agent_dir[[step, 0]];
        row[d + 3] = t.agent_dir[[step, 1]];
    }

    fn fill_target(&self, task: Task, traj: usize, step: usize, row: &mut [f32]) {
        let t = &self.trajs[traj];
        match task {
            Task::Walls => row.iter_mut().zip(t.maze_layout.iter()).for_each(|(o, &v)| *o = v as f32),
            Task::Objects => {
                row.iter_mut().zip(t.targets_vec.slice(s![step, .., ..]).iter()).for_each(|(o, &v)| *o = v)
            }
        }
    }

    /// Inputs and targets for the given `(trajectory, step)` pairs.
    pub fn batch(&self, task: Task, pairs: &[(usize, usize)]) -> (Array2<f32>, Array2<f32>) {
        let mut x = Array2::zeros((pairs.len(), self.input_width()));
        let mut y = Array2::zeros((pairs.len(), self.output_width(task)));
        for (i, &(traj, step)) in pairs.iter().enumerate() {
            self.fill_input(traj, step, x.row_mut(i).into_slice().expect("standard layout"));
            self.fill_target(task, traj, step, y.row_mut(i).into_slice().expect("standard layout"));
        }
        (x, y)
    }
}

/// Steps `T/2..=T` of a trajectory with `T` actions.
pub fn eval_window(steps: usize) -> std::ops::RangeInclusive<usize> {
    steps / 2..=steps
}

/// Per-row metric of predictions against targets.
pub fn row_metrics(task: Task, pred: ArrayView2<f32>, target: ArrayView2<f32>) -> Array1<f64> {
    pred.outer_iter()
        .zip(target.outer_iter())
        .map(|(p, t)| match task {
            Task::Walls => {
                let correct = p.iter().zip(t.iter()).filter(|(&logit, &y)| (logit >= 0.0) == (y >= 0.5)).count();
                correct as f64 / p.len() as f64
            }
            Task::Objects => {
                let sq: f64 = p.iter().zip(t.iter()).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum();
                sq / (p.len() / 2) as f64
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    /// Accuracy in percent for walls, MSE for objects.
    pub score: f64,
    pub per_trajectory: Vec<f64>,
}

/// Scores a predictor over the evaluation window. `predict` maps a
/// trajectory index and its window rows to predictions (logits for walls).
pub fn evaluate_with<F>(data: &ProbeData, task: Task, mut predict: F) -> EvalReport
where
    F: FnMut(usize, &[(usize, usize)], ArrayView2<f32>) -> Array2<f32>,
{
    let mut per_trajectory = Vec::with_capacity(data.trajs.len());
    for (i, t) in data.trajs.iter().enumerate() {
        let pairs: Vec<(usize, usize)> = eval_window(t.steps()).map(|step| (i, step)).collect();
        let (x, y) = data.batch(task, &pairs);
        let pred = predict(i, &pairs, x.view());
        per_trajectory.push(row_metrics(task, pred.view(), y.view()).mean().expect("window is non-empty"));
    }
    let mean = per_trajectory.iter().sum::<f64>() / per_trajectory.len() as f64;
    let score = if task == Task::Walls { 100.0 * mean } else { mean };
    EvalReport { task, score, per_trajectory }
}

/// Predicts the mean training target everywhere.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantBaseline {
    pub task: Task,
    /// Logits for walls, coordinates for objects.
    pub prediction: Array1<f32>,
}

impl ConstantBaseline {
    /// Mean over every step of every training trajectory.
    pub fn fit(train: &[SemanticTrajectory], task: Task) -> Result<Self, ProbeError> {
        let first = train.first().ok_or_else(|| ProbeError::Data("no training trajectories".into()))?;
        let width = task.output_width(first.maze_layout.nrows(), first.targets_vec.shape()[1]);
        let mut sum = Array1::<f64>::zeros(width);
        let mut rows = 0usize;
        for t in train {
            let n = t.agent_pos.nrows();
            match task {
                Task::Walls => sum.iter_mut().zip(t.maze_layout.iter()).for_each(|(s, &v)| *s += v as f64 * n as f64),
                Task::Objects => {
                    let flat = t.targets_vec.to_shape((n, width)).map_err(|e| ProbeError::Data(e.to_string()))?;
                    sum += &flat.mapv(f64::from).sum_axis(ndarray::Axis(0));
                }
            }
            rows += n;
        }
        let mean = sum / rows as f64;
        let prediction = match task {
            Task::Walls => mean.mapv(|p| (p / (1.0 - p)).ln() as f32),
            Task::Objects => mean.mapv(|v| v as f32),
        };
        Ok(ConstantBaseline { task, prediction })
    }

    pub fn evaluate(&self, eval: &[SemanticTrajectory]) -> Result<EvalReport, ProbeError> {
        let reps = RandomReps { dim: 1, seed: 0 };
        let data = ProbeData::new(eval, &reps)?;
        let pred = self.prediction.view().insert_axis(ndarray::Axis(0));
        Ok(evaluate_with(&data, self.task, |_, pairs, _| pred.broadcast((pairs.len(), pred.ncols())).unwrap().to_owned()))
    }
}

/// A trained probe and how it was trained.
#[derive(Clone, Debug)]
pub struct TrainedProbe {
    pub task: Task,
    pub model: Mlp<f32>,
    pub hparams: ProbeHparams,
    pub steps_run: usize,
    pub best_step: usize,
    /// `(step, mean training loss since the previous check, validation metric)`.
    pub history: Vec<(usize, f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct ProbeMeta {
    task: Task,
    input_width: usize,
    hidden_widths: Vec<usize>,
    output_width: usize,
    ln_eps: f64,
    hparams: ProbeHparams,
    steps_run: usize,
    best_step: usize,
}

impl TrainedProbe {
    pub fn predict(&self, x: ArrayView2<f32>) -> Result<Array2<f32>, ProbeError> {
        let expected = self.model.input_width();
        if x.ncols() != expected {
            return Err(ProbeError::WidthMismatch { expected, got: x.ncols() });
        }
        Ok(self.model.forward(x))
    }

    pub fn evaluate(&self, data: &ProbeData) -> Result<EvalReport, ProbeError> {
        self.check_data(data)?;
        Ok(evaluate_with(data, self.task, |_, _, x| self.model.forward(x)))
    }

    fn check_data(&self, data: &ProbeData) -> Result<(), ProbeError> {
        let expected = self.model.input_width();
        if data.input_width() != expected {
            return Err(ProbeError::WidthMismatch { expected, got: data.input_width() });
        }
        let out = data.output_width(self.task);
        if out != self.model.output_width() {
            return Err(ProbeError::Data(format!("targets have width {out}, probe outputs {}", self.model.output_width())));
        }
        Ok(())
    }

    /// Metric at every step index, averaged over the trajectories that are
    /// long enough, for steps `0, stride, 2 * stride, ...`.
    pub fn per_step_curve(&self, data: &ProbeData, stride: usize) -> Result<Vec<(usize, f64)>, ProbeError> {
        self.check_data(data)?;
        let longest = data.trajs.iter().map(|t| t.steps()).max().unwrap_or(0);
        let mut curve = Vec::new();
        for step in (0..=longest).step_by(stride.max(1)) {
            let pairs: Vec<(usize, usize)> =
                data.trajs.iter().enumerate().filter(|(_, t)| t.steps() >= step).map(|(i, _)| (i, step)).collect();
            let (x, y) = data.batch(self.task, &pairs);
            let m = row_metrics(self.task, self.model.forward(x.view()).view(), y.view()).mean().unwrap();
            curve.push((step, if self.task == Task::Walls { 100.0 * m } else { m }));
        }
        Ok(curve)
    }

    /// Parameters as `.npy` entries plus a `probe.json` entry, in one zip.
    pub fn save(&self, path: &Path) -> Result<(), ProbeError> {
        let meta = ProbeMeta {
            task: self.task,
            input_width: self.model.input_width(),
            hidden_widths: self.model.hidden_widths(),
            output_width: self.model.output_width(),
            ln_eps: self.model.ln_eps as f64,
            hparams: self.hparams.clone(),
            steps_run: self.steps_run,
            best_step: self.best_step,
        };
        let mut zip = zip::ZipWriter::new(Cursor::new(Vec::new()));
        let options = zip::write::SimpleFileOptions::default()
            .compression_method(zip::CompressionMethod::Stored)
            .last_modified_time(zip::DateTime::default());
        let mut put = |name: &str, bytes: &[u8]| -> Result<(), TrajError> {
            zip.start_file(name, options)?;
            zip.write_all(bytes)?;
            Ok(())
        };
        put("probe.json", &serde_json::to_vec_pretty(&meta).expect("serializable"))?;
        for (i, h) in self.model.hidden.iter().enumerate() {
            put(&format!("hidden{i}_w.npy"), &npy::to_npy_bytes(h.w.view()))?;
            put(&format!("hidden{i}_b.npy"), &npy::to_npy_bytes(h.b.view()))?;
            put(&format!("hidden{i}_gamma.npy"), &npy::to_npy_bytes(h.gamma.view()))?;
            put(&format!("hidden{i}_beta.npy"), &npy::to_npy_bytes(h.beta.view()))?;
        }
        put("head_w.npy", &npy::to_npy_bytes(self.model.head_w.view()))?;
        put("head_b.npy", &npy::to_npy_bytes(self.model.head_b.view()))?;
        let bytes = zip.finish().map_err(TrajError::from)?.into_inner();
        fs::write(path, bytes).map_err(TrajError::from)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ProbeError> {
        let file = fs::File::open(path).map_err(TrajError::from)?;
        let mut zip = zip::ZipArchive::new(file).map_err(TrajError::from)?;
        let mut json = Vec::new();
        zip.by_name("probe.json").map_err(TrajError::from)?.read_to_end(&mut json).map_err(TrajError::from)?;
        let meta: ProbeMeta = serde_json::from_slice(&json).map_err(|e| ProbeError::Data(e.to_string()))?;
        let mut a = NpzArchive::open(path)?;
        let mut hidden = Vec::with_capacity(meta.hidden_widths.len());
        for i in 0..meta.hidden_widths.len() {
            hidden.push(mlp::Hidden {
                w: a.array::<f32, Ix2>(&format!("hidden{i}_w"))?,
                b: a.array::<f32, Ix1>(&format!("hidden{i}_b"))?,
                gamma: a.array::<f32, Ix1>(&format!("hidden{i}_gamma"))?,
                beta: a.array::<f32, Ix1>(&format!("hidden{i}_beta"))?,
            });
        }
        let model = Mlp { hidden, head_w: a.array("head_w")?, head_b: a.array("head_b")?, ln_eps: meta.ln_eps as f32 };
        if model.input_width() != meta.input_width || model.output_width() != meta.output_width {
            return Err(ProbeError::Data("parameter shapes disagree with probe.json".into()));
        }
        Ok(TrainedProbe {
            task: meta.task,
            model,
            hparams: meta.hparams,
            steps_run: meta.steps_run,
            best_step: meta.best_step,
            history: Vec::new(),
        })
    }
}

fn max_abs(m: &Mlp<f32>) -> f32 {
    m.params().iter().flat_map(|p| p.iter()).fold(0.0f32, |a, &v| a.max(v.abs()))
}

/// Trains a probe from scratch with Adam on uniformly sampled
/// `(trajectory, step)` pairs. The last `val_fraction` of the trajectories
/// is held out; training stops after `patience` steps without a better
/// validation metric, and the best parameters are returned.
pub fn probe_train(data: &ProbeData, task: Task, hp: &ProbeHparams) -> Result<TrainedProbe, ProbeError> {
    if hp.batch_size == 0 || hp.hidden_width == 0 || hp.learning_rate <= 0.0 || hp.eval_interval == 0 {
        return Err(ProbeError::Data("batch size, width, learning rate and eval interval must be positive".into()));
    }
    let n = data.trajs.len();
    let n_val = if n >= 2 { ((n as f64 * hp.val_fraction).ceil() as usize).min(n - 1) } else { 0 };
    let n_fit = n - n_val;
    let mut rng = rng_from_seed(hp.seed);
    let mut model = Mlp::<f32>::new(
        data.input_width(),
        hp.hidden_width,
        hp.hidden_layers,
        data.output_width(task),
        hp.ln_eps,
        rng.random(),
        hp.zero_head,
    );
    let mut adam = Adam::new(&model, hp.learning_rate, hp.adam_eps);
    let mut grads = model.zeros_like();

    let val = if n_val > 0 {
        let pairs: Vec<(usize, usize)> = (0..hp.val_samples)
            .map(|_| {
                let traj = n_fit + rng.random_range(0..n_val);
                let window = eval_window(data.trajs[traj].steps());
                (traj, rng.random_range(window))
            })
            .collect();
        Some(data.batch(task, &pairs))
    } else {
        None
    };
    let score = |m: &Mlp<f32>, (x, y): &(Array2<f32>, Array2<f32>)| -> f64 {
        let metric = x
            .axis_chunks_iter(ndarray::Axis(0), 512)
            .zip(y.axis_chunks_iter(ndarray::Axis(0), 512))
            .map(|(xc, yc)| row_metrics(task, m.forward(xc).view(), yc).sum())
            .sum::<f64>()
            / x.nrows() as f64;
        if task.higher_is_better() { metric } else { -metric }
    };

    let mut best = (f64::NEG_INFINITY, 0usize, model.clone());
    let mut history = Vec::new();
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;
    let mut pairs = vec![(0, 0); hp.batch_size];
    let mut step = 0;
    while step < hp.max_steps {
        for p in pairs.iter_mut() {
            let traj = rng.random_range(0..n_fit);
            *p = (traj, rng.random_range(0..=data.trajs[traj].steps()));
        }
        let (x, y) = data.batch(task, &pairs);
        let (out, trace) = model.forward_trace(x.view());
        let (loss, d_out) = match task {
            Task::Walls => mlp::bce_with_logits(out.view(), y.view()),
            Task::Objects => mlp::point_mse(out.view(), y.view()),
        };
        if !loss.is_finite() {
            return Err(ProbeError::NonFiniteLoss {
                step,
                loss: loss as f64,
                detail: format!("max |param| {}, max |input| {}", max_abs(&model), x.iter().fold(0.0f32, |a, &v| a.max(v.abs()))),
            });
        }
        model.backward(&trace, d_out.view(), &mut grads);
        adam.step(&mut model, &grads);
        step += 1;
        loss_sum += loss as f64;
        loss_count += 1;

        if step % hp.eval_interval == 0 || step == hp.max_steps {
            let metric = val.as_ref().map_or(-loss_sum / loss_count as f64, |v| score(&model, v));
            history.push((step, loss_sum / loss_count as f64, metric));
            loss_sum = 0.0;
            loss_count = 0;
            if metric > best.0 {
                best = (metric, step, model.clone());
            } else if step - best.1 >= hp.patience {
                break;
            }
        }
    }
    let (_, best_step, best_model) = best;
    Ok(TrainedProbe { task, model: best_model, hparams: hp.clone(), steps_run: step, best_step, history })
}

/// `step,metric` lines.
pub fn curve_csv(curve: &[(usize, f64)]) -> String {
    let mut out = String::from("step,metric\n");
    for (step, m) in curve {
        out.push_str(&format!("{step},{m}\n"));
    }
    out
}
