use std::fs;
use std::path::{Path, PathBuf};

use rescast::forecast::ForecastConfig;
use rescast::{EnergyType, GapPolicy, SplitSpec};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Everything one run needs. Relative paths resolve against the config
/// file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub generation_csv: PathBuf,
    pub weather_csv: PathBuf,
    pub artifact_dir: PathBuf,
    pub energy_type: EnergyType,
    pub split: Option<SplitSpec>,
    pub gap_policy: GapPolicy,
    pub model: ForecastConfig,
    pub seed: u64,
    pub persistence_days: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            generation_csv: "generation.csv".into(),
            weather_csv: "weather.csv".into(),
            artifact_dir: "artifacts".into(),
            energy_type: EnergyType::Solar,
            split: None,
            gap_policy: GapPolicy::default(),
            model: ForecastConfig::default(),
            seed: 0,
            persistence_days: 2,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig, Failure> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::parse(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::parse(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.generation_csv, &mut cfg.weather_csv, &mut cfg.artifact_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Fitting settings with the run seed applied.
    pub fn forecast_config(&self) -> ForecastConfig {
        let mut cfg = self.model.clone();
        cfg.trees.seed = self.seed;
        cfg
    }

    /// Per-energy-type artifact root.
    pub fn root(&self) -> PathBuf {
        self.artifact_dir.join(self.energy_type.to_string())
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.root().join("dataset.csv")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root().join("models")
    }

    pub fn split_hours(&self) -> Result<(i64, i64), Failure> {
        let split = self
            .split
            .ok_or_else(|| Failure::parse("config has no `split` (train_end, test_end)"))?;
        split.hours().map_err(|e| Failure::parse(e.to_string()))
    }
}
