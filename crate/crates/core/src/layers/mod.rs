//! Neural building blocks.
//!
//! Every layer keeps its parameters as plain [`Tensor`]s and exposes them in a
//! fixed order through [`Layer::params`]. A forward pass binds those tensors
//! onto a [`Graph`] (as trainable leaves or as constants) and then runs
//! [`Layer::apply`], which only sees the bound [`Var`]s. Gradient checks call
//! `apply` directly with perturbed copies of the parameters.

mod attention;
mod conv;
mod dense;
mod lstm;
mod norm;
mod transformer;

use alloc::string::String;
use alloc::vec::Vec;

pub use attention::{scaled_dot_product_attention, MultiHeadSelfAttention};
pub use conv::{Conv1dLayer, MaxPool1d};
pub use dense::{Activation, DenseLayer};
pub use lstm::LstmLayer;
pub use norm::{LayerNorm, LAYER_NORM_EPS};
pub use transformer::TransformerBlock;

use crate::error::Result;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// A tape plus the parameter leaves bound to it, in binding order.
#[derive(Debug)]
pub struct Graph {
    pub tape: Tape,
    bound: Vec<Var>,
    trainable: bool,
}

impl Graph {
    /// Parameters become trainable leaves.
    pub fn training() -> Self {
        Self {
            tape: Tape::new(),
            bound: Vec::new(),
            trainable: true,
        }
    }

    /// Parameters become constants; no gradients are tracked.
    pub fn inference() -> Self {
        Self {
            tape: Tape::new(),
            bound: Vec::new(),
            trainable: false,
        }
    }

    pub fn bind(&mut self, params: &[&Tensor]) -> Vec<Var> {
        params
            .iter()
            .map(|&t| {
                if self.trainable {
                    let v = self.tape.param(t.clone());
                    self.bound.push(v);
                    v
                } else {
                    self.tape.constant(t.clone())
                }
            })
            .collect()
    }

    /// Trainable leaves in the order they were bound.
    pub fn bound(&self) -> &[Var] {
        &self.bound
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.tape.constant(t)
    }
}

pub(crate) fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|&s| String::from(s)).collect()
}

pub trait Layer {
    /// Names aligned with [`Layer::params`], used as checkpoint keys.
    fn param_names(&self) -> Vec<String>;

    fn params(&self) -> Vec<&Tensor>;

    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    /// Forward pass with parameters already bound as `p`, in [`Layer::params`] order.
    fn apply(&self, tape: &mut Tape, p: &[Var], x: Var) -> Result<Var>;

    fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let p = g.bind(&self.params());
        self.apply(&mut g.tape, &p, x)
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }
}

/// Runs a layer on a single gradient-free input tensor.
pub fn eval_layer(layer: &dyn Layer, x: &Tensor) -> Result<Tensor> {
    let mut g = Graph::inference();
    let xv = g.input(x.clone());
    let out = layer.forward(&mut g, xv)?;
    Ok(g.tape.value(out).clone())
}
