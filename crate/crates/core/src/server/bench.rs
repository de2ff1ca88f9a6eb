use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{ControllerParams, OraclePolicy};
use crate::config::{EnvConfig, Preset};
use crate::rng::derive_seed;
use crate::sim::{EnvState, SimError};

const ORACLE_STREAM: u64 = 0x0AC1E;

/// Seed of oracle episode `index`.
pub fn oracle_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, ORACLE_STREAM, index as u64)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleReport {
    pub preset: Preset,
    pub seed: u64,
    pub scores: Vec<u32>,
    pub mean: f64,
    /// Standard error of the mean (sample standard deviation / sqrt n).
    pub stderr: f64,
    pub reference: f64,
}

impl OracleReport {
    pub fn from_scores(preset: Preset, seed: u64, scores: Vec<u32>) -> Self {
        let n = scores.len() as f64;
        let mean = scores.iter().map(|&s| s as f64).sum::<f64>() / n;
        let var = if scores.len() > 1 {
            scores.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        OracleReport { preset, seed, scores, mean, stderr: (var / n).sqrt(), reference: preset.reference_oracle_score() }
    }

    pub fn ratio(&self) -> f64 {
        self.mean / self.reference
    }

    /// `score,count` for every score from the minimum to the maximum.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("score,count\n");
        let (Some(&lo), Some(&hi)) = (self.scores.iter().min(), self.scores.iter().max()) else {
            return out;
        };
        let mut counts = vec![0usize; (hi - lo + 1) as usize];
        for &s in &self.scores {
            counts[(s - lo) as usize] += 1;
        }
        for (i, c) in counts.iter().enumerate() {
            writeln!(out, "{},{c}", lo as usize + i).unwrap();
        }
        out
    }
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} episodes, mean {:.2} +- {:.2} (reference {:.1}, ratio {:.3})",
            self.preset,
            self.scores.len(),
            self.mean,
            self.stderr,
            self.reference,
            self.ratio()
        )
    }
}

/// Plays one oracle episode and returns its per-step rewards.
pub fn oracle_rewards(config: &EnvConfig, seed: u64) -> Result<Vec<f32>, SimError> {
    let mut state = EnvState::reset(config, seed)?;
    let policy = OraclePolicy::new(ControllerParams::from_sim(&config.sim));
    let mut rewards = Vec::with_capacity(config.maze.episode_length as usize);
    while !state.is_done() {
        rewards.push(state.advance(policy.act(&state))?.0);
    }
    Ok(rewards)
}

/// Runs `n_episodes` oracle episodes on `config` (a preset's maze, possibly
/// with overridden kinematics). Episodes run on the rayon pool; scores keep
/// episode order.
pub fn oracle_bench(preset: Preset, config: &EnvConfig, n_episodes: usize, seed: u64) -> Result<OracleReport, SimError> {
    assert!(n_episodes >= 1, "n_episodes must be at least 1");
    let policy = OraclePolicy::new(ControllerParams::from_sim(&config.sim));
    let scores = (0..n_episodes)
        .into_par_iter()
        .map(|i| Ok(policy.run_episode(&mut EnvState::reset(config, oracle_seed(seed, i))?)))
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(OracleReport::from_scores(preset, seed, scores))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("no episodes to profile")]
    Empty,
    #[error("bin width must be positive")]
    ZeroBin,
}

/// Reward collected per step bin, averaged over episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardProfile {
    pub bin: usize,
    /// Mean reward summed within each bin.
    pub means: Vec<f64>,
    /// Episodes long enough to reach each bin.
    pub counts: Vec<usize>,
}

impl RewardProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start,bin_end,mean_reward,episodes\n");
        for (i, (m, c)) in self.means.iter().zip(&self.counts).enumerate() {
            writeln!(out, "{},{},{m:.6},{c}", i * self.bin, (i + 1) * self.bin).unwrap();
        }
        out
    }

    /// Coefficient of variation (population std / mean) of `bins`.
    pub fn coefficient_of_variation(&self, bins: std::ops::Range<usize>) -> f64 {
        let xs = &self.means[bins];
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        var.sqrt() / mean
    }
}

pub fn reward_profile<E: AsRef<[f32]>>(episodes: &[E], bin: usize) -> Result<RewardProfile, ProfileError> {
    if bin == 0 {
        return Err(ProfileError::ZeroBin);
    }
    let longest = episodes.iter().map(|e| e.as_ref().len()).max().ok_or(ProfileError::Empty)?;
    let n_bins = longest.div_ceil(bin).max(1);
    let mut sums = vec![0.0f64; n_bins];
    let mut counts = vec![0usize; n_bins];
    for ep in episodes {
        for (i, chunk) in ep.as_ref().chunks(bin).enumerate() {
            sums[i] += chunk.iter().map(|&r| r as f64).sum::<f64>();
            counts[i] += 1;
        }
    }
    let means = sums.iter().zip(&counts).map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 }).collect();
    Ok(RewardProfile { bin, means, counts })
}
