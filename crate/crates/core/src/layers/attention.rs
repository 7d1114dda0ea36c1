use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::Layer;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// `softmax(Q Kᵀ / sqrt(d_k)) V` on `[B, T, d_k]` batches. Returns the output
/// and the `[B, T, T]` attention weights.
pub(crate) fn attend(tape: &mut Tape, q: Var, k: Var, v: Var) -> Result<(Var, Var)> {
    let dk = tape.value(q).last_dim();
    let scores = tape.bmm(q, k, true)?;
    let scores = tape.scale(scores, 1.0 / libm::sqrt(dk as f64));
    let weights = tape.softmax(scores);
    let out = tape.bmm(weights, v, false)?;
    Ok((out, weights))
}

/// Scaled dot-product attention on single sequences `Q, K, V: [T, d_k]`.
/// Returns `(output [T, d_k], weights [T, T])`.
pub fn scaled_dot_product_attention(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
) -> Result<(Tensor, Tensor)> {
    if q.rank() != 2 || q.shape() != k.shape() || q.shape() != v.shape() {
        return Err(Error::Shape {
            op: "attention",
            left: q.shape().to_vec(),
            right: if q.shape() != k.shape() {
                k.shape().to_vec()
            } else {
                v.shape().to_vec()
            },
        });
    }
    let (t, d) = (q.shape()[0], q.shape()[1]);
    let mut tape = Tape::new();
    let qv = tape.constant(q.reshape(vec![1, t, d])?);
    let kv = tape.constant(k.reshape(vec![1, t, d])?);
    let vv = tape.constant(v.reshape(vec![1, t, d])?);
    let (out, weights) = attend(&mut tape, qv, kv, vv)?;
    Ok((
        tape.value(out).reshape(vec![t, d])?,
        tape.value(weights).reshape(vec![t, t])?,
    ))
}

/// Multi-head self-attention without projection biases.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadSelfAttention {
    pub model_dim: usize,
    pub heads: usize,
    /// `[model_dim, model_dim]` each.
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
    pub w_o: Tensor,
}

impl MultiHeadSelfAttention {
    pub fn zeros(model_dim: usize, heads: usize) -> Result<Self> {
        if heads == 0 || !model_dim.is_multiple_of(heads) {
            return Err(Error::Invalid(alloc::format!(
                "model_dim {model_dim} is not divisible by {heads} heads"
            )));
        }
        let w = Tensor::zeros(vec![model_dim, model_dim]);
        Ok(Self {
            model_dim,
            heads,
            w_q: w.clone(),
            w_k: w.clone(),
            w_v: w.clone(),
            w_o: w,
        })
    }

    pub fn init(model_dim: usize, heads: usize, rng: &mut SeededRng) -> Result<Self> {
        let mut mha = Self::zeros(model_dim, heads)?;
        for w in mha.params_mut() {
            *w = rng.glorot(&[model_dim, model_dim], model_dim, model_dim);
        }
        Ok(mha)
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.heads
    }

    /// `multi_head_forward` on one sequence `[T, model_dim]`.
    pub fn forward_sequence(&self, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 2 {
            return Err(Error::Invalid(alloc::format!(
                "sequence must be [T, model_dim], got {:?}",
                x.shape()
            )));
        }
        let t = x.shape()[0];
        let out = super::eval_layer(self, &x.reshape(vec![1, t, x.shape()[1]])?)?;
        out.reshape(vec![t, self.model_dim])
    }
}

impl Layer for MultiHeadSelfAttention {
    fn param_names(&self) -> Vec<String> {
        super::names(&["w_q", "w_k", "w_v", "w_o"])
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.w_q, &self.w_k, &self.w_v, &self.w_o]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_q, &mut self.w_k, &mut self.w_v, &mut self.w_o]
    }

    fn apply(&self, tape: &mut Tape, p: &[Var], x: Var) -> Result<Var> {
        let s = tape.value(x).shape();
        if s.len() != 3 || s[2] != self.model_dim {
            return Err(Error::Shape {
                op: "multi_head_attention",
                left: s.to_vec(),
                right: vec![self.model_dim],
            });
        }
        let q = tape.matmul(x, p[0])?;
        let k = tape.matmul(x, p[1])?;
        let v = tape.matmul(x, p[2])?;
        let dk = self.head_dim();
        let mut heads = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = tape.slice_last(q, h * dk, dk)?;
            let kh = tape.slice_last(k, h * dk, dk)?;
            let vh = tape.slice_last(v, h * dk, dk)?;
            heads.push(attend(tape, qh, kh, vh)?.0);
        }
        let joined = if heads.len() == 1 {
            heads[0]
        } else {
            tape.concat_last(&heads)?
        };
        tape.matmul(joined, p[3])
    }
}
