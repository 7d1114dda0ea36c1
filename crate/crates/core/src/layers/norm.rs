use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::Layer;
use crate::error::{Error, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-position normalization over the channel axis, then `gamma ⊙ x̂ + beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: Tensor::full(vec![dim], 1.0),
            beta: Tensor::zeros(vec![dim]),
            eps: LAYER_NORM_EPS,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }
}

impl Layer for LayerNorm {
    fn param_names(&self) -> Vec<String> {
        super::names(&["gamma", "beta"])
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn apply(&self, tape: &mut Tape, p: &[Var], x: Var) -> Result<Var> {
        let s = tape.value(x).shape();
        if s.last() != Some(&self.dim()) {
            return Err(Error::Shape {
                op: "layer_norm",
                left: s.to_vec(),
                right: vec![self.dim()],
            });
        }
        let n = tape.layer_norm(x, self.eps);
        let scaled = tape.mul(n, p[0])?;
        tape.add(scaled, p[1])
    }
}
