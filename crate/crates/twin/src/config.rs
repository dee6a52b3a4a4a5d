//! The run configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use distill_core::column::{ColumnConfig, PerturbationSchedule};
use distill_core::dataset::{NormStats, DEFAULT_FRACTIONS};
use distill_core::physics::PhysicsContext;
use distill_core::sensors::{GenerationConfig, NoiseConfig};
use distill_core::thermo::BinarySystem;
use distill_core::training::TrainingConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TwinError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Train, validation and test fractions of the time-ordered records.
    pub split: [f64; 3],
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            split: DEFAULT_FRACTIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// A model passes the physics check when its mean VLE residual is
    /// strictly below this value.
    pub vle_threshold: f64,
    pub permutation_repeats: usize,
    pub histogram_bins: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            vle_threshold: 1e-4,
            permutation_repeats: 10,
            histogram_bins: 40,
        }
    }
}

/// Default locations used when the command line omits them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every random stream (noise, init, shuffle, collocation,
    /// permutation).
    pub seed: u64,
    pub system: BinarySystem,
    pub column: ColumnConfig,
    #[serde(default)]
    pub schedule: PerturbationSchedule,
    #[serde(default)]
    pub generation: GenerationConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub paths: Paths,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| TwinError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| TwinError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: String| TwinError::Config(e);
        self.system.validate().map_err(|e| cfg_err(e.to_string()))?;
        self.column.validate()?;
        self.generation.validate(self.column.dt)?;
        self.schedule.validate(self.generation.duration_s)?;
        self.noise.validate()?;
        self.training.validate().map_err(|e| cfg_err(e.to_string()))?;
        let s = self.dataset.split;
        if s.iter().any(|f| !(*f >= 0.0)) || (s.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(cfg_err("dataset.split must be non-negative and sum to 1".into()));
        }
        let e = &self.evaluation;
        if !(e.vle_threshold > 0.0) || e.permutation_repeats == 0 || e.histogram_bins == 0 {
            return Err(cfg_err(
                "evaluation: vle_threshold, permutation_repeats and histogram_bins must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Canonical TOML form; parsing it gives back an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }

    pub fn physics_context(&self, stats: &NormStats) -> PhysicsContext {
        PhysicsContext::new(&self.system, &self.column, stats)
    }
}

pub const SNAPSHOT_NAME: &str = "resolved_config.toml";
