//! Flat JSON configuration. Precedence, highest first: command-line flag,
//! `GASFC_OUT_DIR` (output directory only), config file, built-in default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gasfc_core::data::{ScaleMode, SplitMode, ZSCORE_THRESHOLD};
use gasfc_core::eval::{MetricSpace, DEFAULT_PERTURBATION};
use gasfc_core::models::ModelKind;
use gasfc_core::training::{OptimizerKind, TrainConfig};

use crate::checkpoint::FitMethod;
use crate::error::{AppError, Result};

pub const OUT_DIR_ENV: &str = "GASFC_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub data: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub model: ModelKind,
    pub scale: ScaleMode,
    pub split: SplitMode,
    pub test_fraction: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub checkpoint_every: usize,
    /// How `linreg` is fitted; the networks always use gradient descent.
    pub linreg_fit: FitMethod,
    pub zscore_threshold: f64,
    pub metric_space: MetricSpace,
    pub perturbation: f64,
    pub horizon: usize,
    pub scenario: Option<PathBuf>,
    /// kg CO2 per liter. There is no default.
    pub factor: Option<f64>,
}

impl Default for AppConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            data: None,
            out_dir: None,
            model: ModelKind::Hybrid,
            scale: ScaleMode::default(),
            split: SplitMode::default(),
            test_fraction: 0.2,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            optimizer: t.optimizer,
            batch_size: t.batch_size,
            seed: t.seed,
            checkpoint_every: t.checkpoint_every,
            linreg_fit: FitMethod::Ols,
            zscore_threshold: ZSCORE_THRESHOLD,
            metric_space: MetricSpace::default(),
            perturbation: DEFAULT_PERTURBATION,
            horizon: 10,
            scenario: None,
            factor: None,
        }
    }
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(AppError::io(path))?;
        serde_json::from_str(&text)
            .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            batch_size: self.batch_size,
            seed: self.seed,
            checkpoint_every: self.checkpoint_every,
        }
    }

    /// Flag, then environment, then config file, then the working directory.
    pub fn resolve_out_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .or_else(|| self.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    }
}
