use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnalyticShape, AugmentConfig, SamplingMode};
use crate::network::ModelConfig;

/// Where training patches come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Built-in shapes to sample.
    pub shapes: Vec<AnalyticShape>,
    /// Extra OFF or PLY meshes.
    pub meshes: Vec<PathBuf>,
    pub pairs_per_mesh: usize,
    /// Points in each dense cloud that patches are cut from.
    pub dense_points: usize,
    pub sampling: SamplingMode,
    /// Directory written by `gen-data`; training reads it when its manifest exists.
    pub dir: PathBuf,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            shapes: AnalyticShape::ALL.to_vec(),
            meshes: Vec::new(),
            pairs_per_mesh: 200,
            dense_points: 8192,
            sampling: SamplingMode::Poisson,
            dir: PathBuf::from("data"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Caps the total number of optimizer steps; 0 means `epochs` full passes.
    pub max_steps: u64,
    pub alpha_start: f64,
    pub alpha_end: f64,
    pub checkpoint: PathBuf,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-4,
            seed: 0,
            max_steps: 0,
            alpha_start: 0.1,
            alpha_end: 1.0,
            checkpoint: PathBuf::from("model.ckpt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub shapes: Vec<AnalyticShape>,
    pub meshes: Vec<PathBuf>,
    /// Input cloud size `M`; ground truth has `ratio·M` points.
    pub input_points: usize,
    pub noise_levels: Vec<f64>,
    /// Inference patch seeds per `points` input points.
    pub coverage_factor: f64,
    pub seed: u64,
    pub report: PathBuf,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            shapes: AnalyticShape::ALL.to_vec(),
            meshes: Vec::new(),
            input_points: 2048,
            noise_levels: vec![0.0, 0.001, 0.005, 0.01, 0.015, 0.02],
            coverage_factor: 3.0,
            seed: 1,
            report: PathBuf::from("eval.csv"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Paper,
    Desk,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "desk" => Ok(Profile::Desk),
            _ => Err(Error::InvalidArgument(format!("unknown profile {s:?}; expected paper or desk"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Paper => "paper",
            Profile::Desk => "desk",
        })
    }
}

/// Every knob of every subcommand, one TOML section per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub model: ModelConfig,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub augment: AugmentConfig,
    pub eval: EvalConfig,
}

impl PipelineConfig {
    pub fn profile(profile: Profile) -> Self {
        match profile {
            Profile::Paper => PipelineConfig::default(),
            Profile::Desk => PipelineConfig {
                model: ModelConfig::desk(),
                data: DataConfig {
                    pairs_per_mesh: 32,
                    ..DataConfig::default()
                },
                train: TrainConfig {
                    epochs: 40,
                    batch_size: 8,
                    learning_rate: 1e-3,
                    ..TrainConfig::default()
                },
                augment: AugmentConfig::default(),
                eval: EvalConfig {
                    input_points: 1024,
                    ..EvalConfig::default()
                },
            },
        }
    }

    /// The profile's values overridden by whatever `text` sets. Unknown keys
    /// are errors.
    pub fn from_toml(profile: Profile, text: &str, origin: &Path) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            message,
        };
        let overrides: toml::Table = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        let base = toml::Table::try_from(PipelineConfig::profile(profile)).map_err(|e| parse_err(e.to_string()))?;
        let merged = merge(base, overrides);
        let config: PipelineConfig = merged.try_into().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(profile: Profile, path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => PipelineConfig::from_toml(profile, &std::fs::read_to_string(p)?, p),
            None => {
                let c = PipelineConfig::profile(profile);
                c.validate()?;
                Ok(c)
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("pipeline config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.augment.validate()?;
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.train.batch_size == 0 {
            return bad("train.batch_size must be positive");
        }
        if !(self.train.learning_rate > 0.0 && self.train.learning_rate.is_finite()) {
            return bad("train.learning_rate must be positive");
        }
        if self.data.pairs_per_mesh == 0 {
            return bad("data.pairs_per_mesh must be positive");
        }
        if !(self.eval.coverage_factor > 0.0) {
            return bad("eval.coverage_factor must be positive");
        }
        if self.eval.noise_levels.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return bad("eval.noise_levels must be finite and non-negative");
        }
        Ok(())
    }
}

/// Recursive table merge; values in `top` win.
fn merge(mut base: toml::Table, top: toml::Table) -> toml::Table {
    for (k, v) in top {
        match (base.remove(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => {
                base.insert(k, toml::Value::Table(merge(b, t)));
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    base
}
