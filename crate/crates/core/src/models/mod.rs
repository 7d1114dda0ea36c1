//! The hybrid network and its two baselines behind one [`Model`] type.

mod ann;
mod hybrid;
mod linreg;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use ann::AnnBaseline;
pub use hybrid::{HybridConfig, HybridModel};
pub use linreg::{linreg_fit, LinearRegressionModel};

use crate::error::{Error, Result};
use crate::layers::{Graph, Layer};
use crate::rng::SeededRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Anything that maps a `[n, T, f]` batch to `n` predictions.
pub trait Predictor {
    fn predict(&self, x: &Tensor) -> Result<Vec<f64>>;
}

impl<F> Predictor for F
where
    F: Fn(&Tensor) -> Result<Vec<f64>>,
{
    fn predict(&self, x: &Tensor) -> Result<Vec<f64>> {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ModelKind {
    Hybrid,
    Ann,
    Linreg,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Hybrid, ModelKind::Ann, ModelKind::Linreg];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Hybrid => "hybrid",
            ModelKind::Ann => "ann",
            ModelKind::Linreg => "linreg",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hybrid" => Ok(ModelKind::Hybrid),
            "ann" => Ok(ModelKind::Ann),
            "linreg" => Ok(ModelKind::Linreg),
            other => Err(Error::Invalid(alloc::format!(
                "unknown model kind `{other}` (expected hybrid, ann or linreg)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Model {
    Hybrid(HybridModel),
    Ann(AnnBaseline),
    Linreg(LinearRegressionModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Hybrid(_) => ModelKind::Hybrid,
            Model::Ann(_) => ModelKind::Ann,
            Model::Linreg(_) => ModelKind::Linreg,
        }
    }

    pub fn features(&self) -> usize {
        match self {
            Model::Hybrid(m) => m.config.features,
            Model::Ann(m) => m.features(),
            Model::Linreg(m) => m.features(),
        }
    }

    fn layer(&self) -> &dyn Layer {
        match self {
            Model::Hybrid(m) => m,
            Model::Ann(m) => m,
            Model::Linreg(m) => m,
        }
    }

    fn layer_mut(&mut self) -> &mut dyn Layer {
        match self {
            Model::Hybrid(m) => m,
            Model::Ann(m) => m,
            Model::Linreg(m) => m,
        }
    }

    /// Checkpoint names, aligned with [`Model::params`].
    pub fn param_names(&self) -> Vec<String> {
        self.layer().param_names()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layer().params()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layer_mut().params_mut()
    }

    pub fn param_count(&self) -> usize {
        self.layer().param_count()
    }

    /// Replaces every parameter, checking count and shapes.
    pub fn set_params(&mut self, values: Vec<Tensor>) -> Result<()> {
        let slots = self.params_mut();
        if slots.len() != values.len() {
            return Err(Error::Invalid(alloc::format!(
                "expected {} parameter tensors, got {}",
                slots.len(),
                values.len()
            )));
        }
        for (slot, value) in slots.iter().zip(&values) {
            if slot.shape() != value.shape() {
                return Err(Error::Shape {
                    op: "set_params",
                    left: slot.shape().to_vec(),
                    right: value.shape().to_vec(),
                });
            }
        }
        for (slot, value) in slots.into_iter().zip(values) {
            *slot = value;
        }
        Ok(())
    }

    /// Runs the model on `g`; returns a `[n]` prediction node.
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        self.layer().forward(g, x)
    }

    pub fn apply(&self, tape: &mut Tape, p: &[Var], x: Var) -> Result<Var> {
        self.layer().apply(tape, p, x)
    }
}

impl Predictor for Model {
    fn predict(&self, x: &Tensor) -> Result<Vec<f64>> {
        let mut g = Graph::inference();
        let xv = g.input(x.clone());
        let out = self.forward(&mut g, xv)?;
        Ok(g.tape.value(out).data().to_vec())
    }
}

/// Deterministic initialization from `(kind, features, seed)`.
pub fn model_init(kind: ModelKind, features: usize, seed: u64) -> Result<Model> {
    model_init_with(kind, HybridConfig::new(features), seed)
}

/// Like [`model_init`] but with explicit hybrid dimensions (the baselines
/// only use `config.features` and `config.time_steps`).
pub fn model_init_with(kind: ModelKind, config: HybridConfig, seed: u64) -> Result<Model> {
    if config.features == 0 {
        return Err(Error::Invalid("feature count must be at least 1".into()));
    }
    let mut rng = SeededRng::new(seed);
    Ok(match kind {
        ModelKind::Hybrid => Model::Hybrid(HybridModel::init(config, &mut rng)?),
        ModelKind::Ann => Model::Ann(AnnBaseline::init(
            config.features * config.time_steps,
            &[32, 32],
            &mut rng,
        )),
        ModelKind::Linreg => Model::Linreg(LinearRegressionModel::init(
            config.features * config.time_steps,
            &mut rng,
        )),
    })
}

/// Collapses `[n, T, f]` (or `[n, f]`) to `[n, T * f]`.
pub(crate) fn flatten_batch(
    tape: &mut Tape,
    x: Var,
    expected: usize,
    op: &'static str,
) -> Result<Var> {
    let s = tape.value(x).shape().to_vec();
    let width: usize = s.iter().skip(1).product();
    if s.len() < 2 || width != expected {
        return Err(Error::Shape {
            op,
            left: s,
            right: alloc::vec![expected],
        });
    }
    tape.reshape(x, alloc::vec![s[0], width])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_per_seed() {
        for kind in ModelKind::ALL {
            let a = model_init(kind, 9, 42).unwrap();
            let b = model_init(kind, 9, 42).unwrap();
            let c = model_init(kind, 9, 43).unwrap();
            assert_eq!(a, b);
            let bits = |m: &Model| -> Vec<u64> {
                m.params()
                    .iter()
                    .flat_map(|t| t.data().iter().map(|v| v.to_bits()))
                    .collect()
            };
            assert_eq!(bits(&a), bits(&b));
            assert_ne!(bits(&a), bits(&c), "{kind}");
            assert_eq!(a.param_names().len(), a.params().len());
        }
        assert!(model_init(ModelKind::Hybrid, 0, 1).is_err());
    }

    #[test]
    fn kind_round_trips_through_str() {
        for kind in ModelKind::ALL {
            assert_eq!(kind.as_str().parse::<ModelKind>().unwrap(), kind);
        }
        assert!("lstm".parse::<ModelKind>().is_err());
    }

    #[test]
    fn set_params_checks_shapes() {
        let mut m = model_init(ModelKind::Linreg, 3, 0).unwrap();
        assert!(m
            .set_params(alloc::vec![Tensor::zeros(alloc::vec![3])])
            .is_err());
        assert!(m
            .set_params(alloc::vec![
                Tensor::zeros(alloc::vec![4]),
                Tensor::zeros(alloc::vec![1])
            ])
            .is_err());
        m.set_params(alloc::vec![
            Tensor::full(alloc::vec![3], 2.0),
            Tensor::scalar(1.0)
        ])
        .unwrap();
        let y = m.predict(&Tensor::full(alloc::vec![2, 1, 3], 1.0)).unwrap();
        assert_eq!(y, alloc::vec![7.0, 7.0]);
    }
}
