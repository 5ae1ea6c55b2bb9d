//! Staged fault location: faulted phases, then distance, then path.
//!
//! A phase classifier picks one of the seven fault types; that type's
//! distance regressor estimates the distance; the estimate selects the near
//! (`H1`, up to 4500 m) or far (`H2`) path classifier of the same type.

mod dataset;
mod evaluate;
mod locator;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::neuralnet::TrainOptions;

pub use dataset::{generate_dataset, generate_in_memory, load_dataset, FeatureDataset, LabeledStats};
pub use evaluate::{
    ablation, e_rel, evaluate, robustness_eval, summarize, write_report_files, AblationReport, CorrelationStats, DistanceRow,
    EvaluationReport, PathRow, RecordOutcome, RobustnessReport, Summary,
};
pub use locator::{locate, route, train_pipeline, FaultLocator, NetRole, PredictionResult, TrainedNet};

/// Route-group boundary in meters; distances up to and including it are near.
pub const DISTANCE_THRESHOLD_M: f64 = 4500.0;
/// Normalising length of the relative distance error.
pub const REFERENCE_LENGTH_M: f64 = 11_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PathGroup {
    H1,
    H2,
}

impl PathGroup {
    pub const ALL: [PathGroup; 2] = [PathGroup::H1, PathGroup::H2];

    pub fn of_distance(d: f64) -> Self {
        if d <= DISTANCE_THRESHOLD_M {
            PathGroup::H1
        } else {
            PathGroup::H2
        }
    }

    /// Paths reachable within the group's distance range.
    pub fn classes(self) -> &'static [u8] {
        match self {
            PathGroup::H1 => &[1, 2, 3, 4],
            PathGroup::H2 => &[1, 5, 6],
        }
    }

    pub fn number(self) -> u8 {
        match self {
            PathGroup::H1 => 1,
            PathGroup::H2 => 2,
        }
    }
}

impl fmt::Display for PathGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// One distance net per fault type and one path net per (type, group).
    #[default]
    MultipleAnn,
    /// One distance net and one path net shared by every fault type.
    SingleAnn,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multiple-ann" | "multiple" => Ok(Mode::MultipleAnn),
            "single-ann" | "single" => Ok(Mode::SingleAnn),
            _ => Err(Error::Unknown {
                kind: "mode",
                name: s.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub seed: u64,
    pub phase_hidden: usize,
    /// Hidden sizes of the distance nets in `FaultType::ALL` order.
    pub distance_hidden: [usize; 7],
    /// Hidden sizes of the path nets in `FaultType::ALL` order.
    pub path_hidden: [usize; 7],
    pub single_distance_hidden: usize,
    pub single_path_hidden: usize,
    pub phase_trainer: String,
    pub distance_trainer: String,
    pub path_trainer: String,
    /// Inverse-frequency sample weights for the classifiers.
    pub class_weights: bool,
    pub train: TrainOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: Mode::MultipleAnn,
            seed: 1,
            phase_hidden: 10,
            distance_hidden: [10, 20, 30, 10, 30, 10, 30],
            path_hidden: [50, 50, 30, 50, 50, 30, 30],
            single_distance_hidden: 30,
            single_path_hidden: 30,
            phase_trainer: "scg".into(),
            distance_trainer: "lm".into(),
            path_trainer: "scg".into(),
            class_weights: false,
            train: TrainOptions::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let sizes = self
            .distance_hidden
            .iter()
            .chain(&self.path_hidden)
            .chain([&self.phase_hidden, &self.single_distance_hidden, &self.single_path_hidden]);
        for &q in sizes {
            if q == 0 {
                return Err(Error::InvalidConfig("hidden layer sizes must be >= 1".into()));
            }
        }
        for t in [&self.phase_trainer, &self.distance_trainer, &self.path_trainer] {
            crate::neuralnet::TRAINERS.get(t)?;
        }
        Ok(())
    }

    /// Hex digest of the canonical JSON form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serialises")))
    }
}

/// Per-network seed derived from the run seed and the network's name, so a
/// network's initial weights do not depend on training order.
pub fn derived_seed(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Runs `f` on a pool with `jobs` threads (0 = rayon's default).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}
