use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::flatten_batch;
use crate::error::Result;
use crate::layers::{Activation, DenseLayer, Layer};
use crate::rng::SeededRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Fully connected baseline: flatten, relu hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnBaseline {
    pub hidden: Vec<DenseLayer>,
    pub output: DenseLayer,
}

impl AnnBaseline {
    pub fn init(inputs: usize, hidden: &[usize], rng: &mut SeededRng) -> Self {
        let mut layers = Vec::with_capacity(hidden.len());
        let mut width = inputs;
        for &h in hidden {
            layers.push(DenseLayer::init(width, h, Activation::Relu, rng));
            width = h;
        }
        Self {
            hidden: layers,
            output: DenseLayer::init(width, 1, Activation::Linear, rng),
        }
    }

    pub fn features(&self) -> usize {
        self.hidden.first().unwrap_or(&self.output).inputs()
    }

    fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.hidden.iter().chain(core::iter::once(&self.output))
    }
}

impl Layer for AnnBaseline {
    fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.hidden.len() {
            names.push(alloc::format!("hidden{i}.weights"));
            names.push(alloc::format!("hidden{i}.bias"));
        }
        names.extend(crate::layers::names(&["output.weights", "output.bias"]));
        names
    }

    fn params(&self) -> Vec<&Tensor> {
        self.layers().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        for l in self.hidden.iter_mut() {
            out.extend(l.params_mut());
        }
        out.extend(self.output.params_mut());
        out
    }

    fn apply(&self, tape: &mut Tape, p: &[Var], x: Var) -> Result<Var> {
        let n = tape.value(x).shape().first().copied().unwrap_or(0);
        let mut h = flatten_batch(tape, x, self.features(), "ann_forward")?;
        for (layer, lp) in self.layers().zip(p.chunks(2)) {
            h = layer.apply(tape, lp, h)?;
        }
        tape.reshape(h, vec![n])
    }
}
