use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::Layer;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
}

/// `act(x W + b)` over the last axis of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `[in, out]`
    pub weights: Tensor,
    /// `[out]`
    pub bias: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            weights: Tensor::zeros(vec![inputs, outputs]),
            bias: Tensor::zeros(vec![outputs]),
            activation,
        }
    }

    pub fn init(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut SeededRng,
    ) -> Self {
        Self {
            weights: rng.glorot(&[inputs, outputs], inputs, outputs),
            bias: Tensor::zeros(vec![outputs]),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[1]
    }
}

impl Layer for DenseLayer {
    fn param_names(&self) -> Vec<String> {
        super::names(&["weights", "bias"])
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.weights, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weights, &mut self.bias]
    }

    fn apply(&self, tape: &mut Tape, p: &[Var], x: Var) -> Result<Var> {
        let s = tape.value(x).shape();
        if s.last() != Some(&self.inputs()) {
            return Err(Error::Shape {
                op: "dense",
                left: s.to_vec(),
                right: self.weights.shape().to_vec(),
            });
        }
        let z = tape.matmul(x, p[0])?;
        let z = tape.add(z, p[1])?;
        Ok(match self.activation {
            Activation::Linear => z,
            Activation::Relu => tape.relu(z),
            Activation::Tanh => tape.tanh(z),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{check, GradCheck};
    use crate::layers::eval_layer;

    #[test]
    fn affine_map() {
        let l = DenseLayer {
            weights: Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap(),
            bias: Tensor::from_vec(vec![0.5, -10.0]).unwrap(),
            activation: Activation::Relu,
        };
        let y = eval_layer(&l, &Tensor::from_rows(&[&[1.0, 1.0]]).unwrap()).unwrap();
        assert_eq!(y.data(), &[4.5, 0.0]);
        assert!(eval_layer(&l, &Tensor::zeros(vec![1, 3])).is_err());
    }

    #[test]
    fn gradients() {
        for (seed, act) in (0..10).zip(
            [Activation::Linear, Activation::Relu, Activation::Tanh]
                .iter()
                .cycle(),
        ) {
            let mut rng = SeededRng::new(seed);
            let mut l = DenseLayer::init(3, 5, *act, &mut rng);
            l.bias = rng.glorot(&[5], 1, 1);
            let mut inputs: Vec<Tensor> = l.params().into_iter().cloned().collect();
            inputs.push(rng.glorot(&[4, 1, 3], 1, 1));
            inputs.push(rng.glorot(&[4, 1, 5], 1, 1));
            let report = check(
                &inputs,
                |t, v| {
                    let y = l.apply(t, &v[..2], v[2])?;
                    let y = t.mul(y, v[3])?;
                    Ok(t.sum(y))
                },
                &GradCheck::default(),
            )
            .unwrap();
            assert!(report.max_rel_err < 1e-4, "seed {seed}: {report:?}");
        }
    }
}
