use alloc::string::String;
use alloc::vec::Vec;

use super::{Activation, DenseLayer, Layer, LayerNorm, MultiHeadSelfAttention};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Post-norm Transformer encoder block:
///
/// ```text
/// y1  = LayerNorm1(x + MHSA(x))
/// out = LayerNorm2(y1 + Dense2(relu(Dense1(y1))))
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerBlock {
    pub attention: MultiHeadSelfAttention,
    pub norm1: LayerNorm,
    pub ffn_in: DenseLayer,
    pub ffn_out: DenseLayer,
    pub norm2: LayerNorm,
}

impl TransformerBlock {
    pub fn zeros(model_dim: usize, heads: usize, ffn_dim: usize) -> Result<Self> {
        Ok(Self {
            attention: MultiHeadSelfAttention::zeros(model_dim, heads)?,
            norm1: LayerNorm::new(model_dim),
            ffn_in: DenseLayer::zeros(model_dim, ffn_dim, Activation::Relu),
            ffn_out: DenseLayer::zeros(ffn_dim, model_dim, Activation::Linear),
            norm2: LayerNorm::new(model_dim),
        })
    }

    pub fn init(
        model_dim: usize,
        heads: usize,
        ffn_dim: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        Ok(Self {
            attention: MultiHeadSelfAttention::init(model_dim, heads, rng)?,
            norm1: LayerNorm::new(model_dim),
            ffn_in: DenseLayer::init(model_dim, ffn_dim, Activation::Relu, rng),
            ffn_out: DenseLayer::init(ffn_dim, model_dim, Activation::Linear, rng),
            norm2: LayerNorm::new(model_dim),
        })
    }

    pub fn model_dim(&self) -> usize {
        self.attention.model_dim
    }

    fn parts(&self) -> [&dyn Layer; 5] {
        [
            &self.attention,
            &self.norm1,
            &self.ffn_in,
            &self.ffn_out,
            &self.norm2,
        ]
    }

    /// `transformer_block_forward` on one sequence `[T, model_dim]`.
    pub fn forward_sequence(&self, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 2 {
            return Err(Error::Invalid(alloc::format!(
                "sequence must be [T, model_dim], got {:?}",
                x.shape()
            )));
        }
        let t = x.shape()[0];
        let out = super::eval_layer(self, &x.reshape(alloc::vec![1, t, x.shape()[1]])?)?;
        out.reshape(alloc::vec![t, self.model_dim()])
    }
}

impl Layer for TransformerBlock {
    fn param_names(&self) -> Vec<String> {
        let prefixed = |prefix: &str, layer: &dyn Layer| {
            layer
                .param_names()
                .into_iter()
                .map(|n| alloc::format!("{prefix}.{n}"))
                .collect::<Vec<_>>()
        };
        let mut out = prefixed("attention", &self.attention);
        out.extend(prefixed("norm1", &self.norm1));
        out.extend(prefixed("ffn_in", &self.ffn_in));
        out.extend(prefixed("ffn_out", &self.ffn_out));
        out.extend(prefixed("norm2", &self.norm2));
        out
    }

    fn params(&self) -> Vec<&Tensor> {
        self.parts().into_iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.attention.params_mut();
        out.extend(self.norm1.params_mut());
        out.extend(self.ffn_in.params_mut());
        out.extend(self.ffn_out.params_mut());
        out.extend(self.norm2.params_mut());
        out
    }

    fn apply(&self, tape: &mut Tape, p: &[Var], x: Var) -> Result<Var> {
        let attn = self.attention.apply(tape, &p[0..4], x)?;
        let r1 = tape.add(x, attn)?;
        let y1 = self.norm1.apply(tape, &p[4..6], r1)?;
        let hidden = self.ffn_in.apply(tape, &p[6..8], y1)?;
        let ffn = self.ffn_out.apply(tape, &p[8..10], hidden)?;
        let r2 = tape.add(y1, ffn)?;
        self.norm2.apply(tape, &p[10..12], r2)
    }
}
