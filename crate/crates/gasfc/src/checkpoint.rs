//! Versioned JSON checkpoints. A checkpoint holds everything `evaluate`,
//! `forecast` and `sensitivity` need: the parameters, the scaler, the
//! feature order and the annual history used for trend extrapolation.
//! Loading reproduces every parameter bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use gasfc_core::data::{AnnualRow, ScalerParams};
use gasfc_core::models::{model_init_with, HybridConfig, Model, ModelKind};
use gasfc_core::training::TrainConfig;
use gasfc_core::Tensor;

use crate::error::{AppError, Result};

pub const FORMAT: &str = "gasfc-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    #[default]
    Gradient,
    /// Closed-form least squares; linear regression only.
    Ols,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    /// Initialization seed; also rebuilds the architecture on load.
    pub seed: u64,
    pub fit: FitMethod,
    pub hybrid_config: HybridConfig,
    pub train_config: TrainConfig,
    pub scaler: ScalerParams,
    pub feature_names: Vec<String>,
    /// Calendar-year means of the training file.
    pub history: Vec<AnnualRow>,
    pub params: Vec<ParamRecord>,
}

pub struct CheckpointMeta {
    pub seed: u64,
    pub fit: FitMethod,
    pub hybrid_config: HybridConfig,
    pub train_config: TrainConfig,
    pub scaler: ScalerParams,
    pub feature_names: Vec<String>,
    pub history: Vec<AnnualRow>,
}

impl Checkpoint {
    pub fn new(model: &Model, meta: CheckpointMeta) -> Self {
        let params = model
            .param_names()
            .into_iter()
            .zip(model.params())
            .map(|(name, t)| ParamRecord {
                name,
                shape: t.shape().to_vec(),
                data: t.data().to_vec(),
            })
            .collect();
        Self {
            format: FORMAT.into(),
            version: VERSION,
            kind: model.kind(),
            seed: meta.seed,
            fit: meta.fit,
            hybrid_config: meta.hybrid_config,
            train_config: meta.train_config,
            scaler: meta.scaler,
            feature_names: meta.feature_names,
            history: meta.history,
            params,
        }
    }

    /// Rebuilds the model and checks names and shapes against the stored
    /// parameters.
    pub fn model(&self) -> std::result::Result<Model, String> {
        let mut model =
            model_init_with(self.kind, self.hybrid_config, self.seed).map_err(|e| e.to_string())?;
        let names = model.param_names();
        let stored: Vec<&str> = self.params.iter().map(|p| p.name.as_str()).collect();
        if names != stored {
            return Err(format!(
                "parameter names do not match a {} model ({} stored, {} expected)",
                self.kind,
                stored.len(),
                names.len()
            ));
        }
        let tensors = self
            .params
            .iter()
            .map(|p| {
                Tensor::new(p.shape.clone(), p.data.clone())
                    .map_err(|e| format!("parameter {}: {e}", p.name))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        model.set_params(tensors).map_err(|e| e.to_string())?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes") + "\n"
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if ck.format != FORMAT {
            return Err(format!("not a checkpoint (format `{}`)", ck.format));
        }
        if ck.version != VERSION {
            return Err(format!(
                "unsupported version {} (this build reads {VERSION})",
                ck.version
            ));
        }
        if ck.scaler.columns.len() != ck.feature_names.len() + 1 {
            return Err("scaler width does not match the feature names".into());
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(AppError::io(dir))?;
        }
        std::fs::write(path, self.to_json()).map_err(AppError::io(path))
    }

    /// Reads, validates and rebuilds. Every failure maps to a checkpoint
    /// error.
    pub fn load(path: &Path) -> Result<(Self, Model)> {
        let fail = |reason: String| AppError::Checkpoint {
            path: path.to_path_buf(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
        let ck = Self::from_json(&text).map_err(fail)?;
        let model = ck.model().map_err(fail)?;
        Ok((ck, model))
    }
}
