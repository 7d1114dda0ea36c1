//! Loss, optimizers and the training loop.
//!
//! One iteration is one optimizer step. With the default full-batch setting
//! an epoch is a single iteration; with `batch_size = Some(b)` an epoch is
//! `ceil(n / b)` iterations over a seeded permutation of the rows.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::layers::Graph;
use crate::models::{Model, Predictor};
use crate::rng::SeededRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// `Σ(pred - target)² / n` as a scalar node.
pub fn mse_loss(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    let (p, t) = (tape.value(pred), tape.value(target));
    if p.shape() != t.shape() {
        return Err(Error::Shape {
            op: "mse_loss",
            left: p.shape().to_vec(),
            right: t.shape().to_vec(),
        });
    }
    if p.is_empty() {
        return Err(Error::Empty("mse_loss input"));
    }
    let d = tape.sub(pred, target)?;
    let sq = tape.mul(d, d)?;
    tape.mean(sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Invalid(alloc::format!(
                "unknown optimizer `{other}` (expected sgd or adam)"
            ))),
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// SGD, or Adam with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Steps taken so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Updates `params` in place. Nothing is modified if any gradient is
    /// non-finite.
    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Invalid(alloc::format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() {
                return Err(Error::Shape {
                    op: "optimizer_step",
                    left: p.shape().to_vec(),
                    right: g.shape().to_vec(),
                });
            }
            if g.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::NanGradient {
                    iteration: self.step as usize + 1,
                    param: i,
                });
            }
        }
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.into_iter().zip(grads) {
                    for (w, d) in p.data_mut().iter_mut().zip(g.data()) {
                        *w -= lr * d;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.m.is_empty() {
                    self.m = grads.iter().map(|g| alloc::vec![0.0; g.len()]).collect();
                    self.v = self.m.clone();
                }
                let t = self.step as f64;
                let c1 = 1.0 - libm::pow(ADAM_BETA1, t);
                let c2 = 1.0 - libm::pow(ADAM_BETA2, t);
                for (((p, g), m), v) in params
                    .into_iter()
                    .zip(grads)
                    .zip(&mut self.m)
                    .zip(&mut self.v)
                {
                    for (((w, &d), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * d;
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * d * d;
                        *w -= lr * (*m / c1) / (libm::sqrt(*v / c2) + ADAM_EPSILON);
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    /// Drives mini-batch order; full-batch training does not draw from it.
    pub seed: u64,
    /// Log every this many iterations.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 600,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            batch_size: None,
            seed: 42,
            checkpoint_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid(alloc::format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::Invalid("checkpoint_every must be at least 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Invalid("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Training-set errors after `iteration` steps, in scaled target units.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogRow {
    pub iteration: usize,
    pub train_rmse: f64,
    pub train_mae: f64,
}

fn log_row(model: &Model, x: &Tensor, y: &Tensor, iteration: usize) -> Result<LogRow> {
    let pred = model.predict(x)?;
    let n = y.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, t) in pred.iter().zip(y.data()) {
        se += (p - t) * (p - t);
        ae += libm::fabs(p - t);
    }
    Ok(LogRow {
        iteration,
        train_rmse: libm::sqrt(se / n),
        train_mae: ae / n,
    })
}

/// Gradient-descent training of `model` on `x: [n, T, f]`, `y: [n]`.
///
/// Deterministic in `(model, x, y, config)`. Logs a [`LogRow`] every
/// `checkpoint_every` iterations, evaluated on the whole training set after
/// that iteration's update.
pub fn train(
    mut model: Model,
    x: &Tensor,
    y: &Tensor,
    config: &TrainConfig,
) -> Result<(Model, Vec<LogRow>)> {
    config.validate()?;
    let n = y.len();
    if n == 0 {
        return Err(Error::Empty("training set"));
    }
    if x.shape().first() != Some(&n) {
        return Err(Error::Shape {
            op: "train",
            left: x.shape().to_vec(),
            right: y.shape().to_vec(),
        });
    }
    let batch = config.batch_size.unwrap_or(n).min(n);
    let mut rng = SeededRng::new(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate);
    let mut log: Vec<LogRow> = Vec::new();
    let mut iteration = 0usize;

    for _ in 0..config.epochs {
        if batch < n {
            rng.shuffle(&mut order);
        }
        for chunk in order.chunks(batch) {
            iteration += 1;
            let (bx, by) = if batch < n {
                (x.gather_rows(chunk)?, y.gather_rows(chunk)?)
            } else {
                (x.clone(), y.clone())
            };
            let mut g = Graph::training();
            let xv = g.input(bx);
            let yv = g.input(by);
            let pred = model.forward(&mut g, xv)?;
            let loss = mse_loss(&mut g.tape, pred, yv)?;
            let loss_value = g.tape.value(loss).data()[0];
            if !loss_value.is_finite() {
                return Err(Error::Diverged {
                    iteration,
                    loss: loss_value,
                    last_finite: log.last().copied(),
                });
            }
            let bound = g.bound().to_vec();
            let grads = g.tape.backward(loss)?;
            let grads: Vec<Tensor> = bound
                .iter()
                .zip(model.params())
                .map(|(&v, p)| grads.get_or_zeros(v, p))
                .collect();
            opt.step(model.params_mut(), &grads).map_err(|e| match e {
                Error::NanGradient { param, .. } => Error::NanGradient { iteration, param },
                other => other,
            })?;
            if model
                .params()
                .iter()
                .any(|p| p.data().iter().any(|v| !v.is_finite()))
            {
                return Err(Error::Diverged {
                    iteration,
                    loss: f64::INFINITY,
                    last_finite: log.last().copied(),
                });
            }
            if iteration.is_multiple_of(config.checkpoint_every) {
                let row = log_row(&model, x, y, iteration)?;
                if !row.train_rmse.is_finite() {
                    return Err(Error::Diverged {
                        iteration,
                        loss: row.train_rmse * row.train_rmse,
                        last_finite: log.last().copied(),
                    });
                }
                log.push(row);
            }
        }
    }
    Ok((model, log))
}
