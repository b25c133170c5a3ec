use std::path::{Path, PathBuf};

use mimeforge::dataset::{ConditionVector, DatasetConfig};
use mimeforge::emg::{ExcitationProfile, Noise, PoolConfig, DEFAULT_LEVELS};
use mimeforge::eval::{BenchConfig, RegressorConfig};
use mimeforge::model::ModelConfig;
use mimeforge::teacher::{ConditionAxis, CylinderConfig};
use mimeforge::train::TrainConfig;
use mimeforge::{Error, Exec, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

/// Input files. Command-line flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Spike trains as a JSON array of arrays of seconds.
    pub spikes: Option<PathBuf>,
    /// Condition path as a JSON list of `[t, [c1..c6]]` knots.
    pub condition_path: Option<PathBuf>,
}

/// Which motor units `train` fits and `eval` reports as training data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainOn {
    /// The training side of the unit split.
    #[default]
    Split,
    /// Every unit; no held-out set.
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    pub seed: u64,
    pub steps: usize,
    /// Steps per leg of a traversal.
    pub legs: usize,
    pub axis: ConditionAxis,
    /// Which motor units a traversal covers: "train", "test" or "all".
    pub split: String,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig { seed: 0, steps: 9, legs: 4, axis: ConditionAxis::Velocity, split: "test".into() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthMode {
    /// Dataset MUAPs, fixed over time.
    #[default]
    Static,
    /// Model MUAPs regenerated along a condition path.
    Dynamic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub mode: SynthMode,
    pub pool: PoolConfig,
    pub excitation: ExcitationProfile,
    pub noise: Option<Noise>,
    pub levels: usize,
    /// Base of the illustrative path when no path file is given.
    pub base_conditions: ConditionVector,
    pub latent_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            mode: SynthMode::Static,
            pool: PoolConfig { n: 20, ..Default::default() },
            excitation: ExcitationProfile {
                knots: vec![(0.0, 0.0), (1.0, 0.6), (2.0, 0.6), (3.0, 0.0)],
                duration_s: 3.0,
                rate_hz: 2000.0,
            },
            noise: None,
            levels: DEFAULT_LEVELS,
            base_conditions: ConditionVector([0.75; 6]),
            latent_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub informativeness: bool,
    pub regressor: RegressorConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { informativeness: true, regressor: RegressorConfig::default() }
    }
}

/// Everything a command needs besides its input files and output directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub cylinder: CylinderConfig,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub train_on: TrainOn,
    pub precision: Precision,
    pub exec: Exec,
    pub paths: Paths,
    pub generate: GenerateConfig,
    pub synth: SynthConfig,
    pub eval: EvalConfig,
    pub bench: BenchConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Io { path: path.to_path_buf(), source: e },
            _ => Error::Stream(e),
        })?;
        Self::from_json(&text)
    }

    /// Cross-section checks: the model grid must match the teacher's.
    pub fn validate(&self) -> Result<()> {
        self.cylinder.validate()?;
        self.dataset.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        let (m, c, d) = (&self.model, &self.cylinder, &self.dataset);
        if (m.rows, m.cols, m.samples) != (c.rows, c.cols, d.samples) {
            return Err(Error::Config(format!(
                "model grid {}x{}x{} does not match teacher grid {}x{}x{}",
                m.rows, m.cols, m.samples, c.rows, c.cols, d.samples
            )));
        }
        if !matches!(self.generate.split.as_str(), "train" | "test" | "all") {
            return Err(Error::Config(format!("generate.split must be train, test or all, got {:?}", self.generate.split)));
        }
        Ok(())
    }
}
