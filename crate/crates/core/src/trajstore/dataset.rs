use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{record, SemanticTrajectory, TrajError, FORMAT_VERSION};
use crate::agents::PolicyConfig;
use crate::config::{CameraParams, EnvConfig};
use crate::rng::derive_seed;

const TRAIN_STREAM: u64 = 1;
const EVAL_STREAM: u64 = 2;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Inputs of a dataset run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub env: EnvConfig,
    pub camera: CameraParams,
    pub policy: PolicyConfig,
    /// Actions per trajectory.
    pub steps: u32,
    pub n_train: usize,
    pub n_eval: usize,
    pub master_seed: u64,
}

impl DatasetSpec {
    /// Per-trajectory seed of item `index` in `split`.
    pub fn seed(&self, split: &str, index: usize) -> u64 {
        let stream = if split == "train" { TRAIN_STREAM } else { EVAL_STREAM };
        derive_seed(self.master_seed, stream, index as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the dataset root.
    pub file: String,
    pub seed: u64,
    pub sha256: String,
    pub score: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub count: usize,
    pub files: Vec<FileEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub spec: DatasetSpec,
    pub train: SplitManifest,
    pub eval: SplitManifest,
}

impl DatasetManifest {
    pub fn load(root: &Path) -> Result<Self, TrajError> {
        let bytes = fs::read(root.join(MANIFEST_FILE))?;
        serde_json::from_slice(&bytes).map_err(|e| TrajError::Manifest(e.to_string()))
    }

    pub fn split(&self, name: &str) -> Option<&SplitManifest> {
        match name {
            "train" => Some(&self.train),
            "eval" => Some(&self.eval),
            _ => None,
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Records `n_train + n_eval` trajectories into `root/train` and
/// `root/eval`, then writes `root/manifest.json`. Each file is written under
/// a temporary name and renamed when complete. `threads = 0` uses rayon's
/// default pool size.
pub fn generate_dataset(spec: &DatasetSpec, root: &Path, threads: usize) -> Result<DatasetManifest, TrajError> {
    if spec.n_train == 0 || spec.n_eval == 0 {
        return Err(TrajError::Manifest("both splits need at least one trajectory".into()));
    }
    spec.env.maze.validate().map_err(crate::sim::SimError::from)?;
    let jobs: Vec<(&str, usize)> =
        (0..spec.n_train).map(|i| ("train", i)).chain((0..spec.n_eval).map(|i| ("eval", i))).collect();
    for split in ["train", "eval"] {
        fs::create_dir_all(root.join(split))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| TrajError::Manifest(e.to_string()))?;
    let entries: Vec<FileEntry> = pool.install(|| {
        jobs.par_iter()
            .map(|&(split, index)| {
                let seed = spec.seed(split, index);
                let rec = record(&spec.env, &spec.camera, &spec.policy, seed, spec.steps)?;
                let bytes = rec.to_npz_bytes()?;
                let file = format!("{split}/{index:06}.npz");
                let tmp = root.join(format!("{file}.tmp"));
                fs::write(&tmp, &bytes)?;
                fs::rename(&tmp, root.join(&file))?;
                Ok(FileEntry { file, seed, sha256: sha256_hex(&bytes), score: rec.total_reward() as u32 })
            })
            .collect::<Result<_, TrajError>>()
    })?;
    let (train, eval): (Vec<_>, Vec<_>) = entries.into_iter().partition(|e| e.file.starts_with("train/"));
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        spec: spec.clone(),
        train: SplitManifest { count: train.len(), files: train },
        eval: SplitManifest { count: eval.len(), files: eval },
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| TrajError::Manifest(e.to_string()))?;
    fs::write(root.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

/// Checks that the split directories hold exactly the manifest's files and,
/// if `checksums` is set, that their contents hash to the recorded values.
pub fn verify_dataset(root: &Path, checksums: bool) -> Result<DatasetManifest, TrajError> {
    let manifest = DatasetManifest::load(root)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(TrajError::Manifest(format!("format version {} (expected {FORMAT_VERSION})", manifest.format_version)));
    }
    for name in ["train", "eval"] {
        let split = manifest.split(name).expect("known split");
        if split.count != split.files.len() {
            return Err(TrajError::Manifest(format!("{name}: count {} but {} entries", split.count, split.files.len())));
        }
        let mut on_disk = BTreeSet::new();
        for entry in fs::read_dir(root.join(name))? {
            let file_name = entry?.file_name().to_string_lossy().into_owned();
            if file_name.ends_with(".tmp") {
                return Err(TrajError::Manifest(format!("{name}/{file_name}: incomplete write")));
            }
            if file_name.ends_with(".npz") {
                on_disk.insert(format!("{name}/{file_name}"));
            }
        }
        let listed: BTreeSet<String> = split.files.iter().map(|f| f.file.clone()).collect();
        if listed != on_disk {
            let missing: Vec<_> = listed.difference(&on_disk).collect();
            let extra: Vec<_> = on_disk.difference(&listed).collect();
            return Err(TrajError::Manifest(format!("{name}: missing {missing:?}, unlisted {extra:?}")));
        }
        if checksums {
            for f in &split.files {
                let got = sha256_hex(&fs::read(root.join(&f.file))?);
                if got != f.sha256 {
                    return Err(TrajError::Manifest(format!("{}: checksum mismatch", f.file)));
                }
            }
        }
    }
    Ok(manifest)
}

impl DatasetManifest {
    /// Semantic keys of every trajectory in `split`, in manifest order.
    pub fn load_semantic(&self, root: &Path, split: &str) -> Result<Vec<SemanticTrajectory>, TrajError> {
        let split = self.split(split).ok_or_else(|| TrajError::Manifest(format!("no split named {split}")))?;
        split.files.par_iter().map(|f| SemanticTrajectory::load(&root.join(&f.file))).collect()
    }
}
