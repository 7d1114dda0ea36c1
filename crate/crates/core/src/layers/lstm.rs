use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{eval_layer, Layer};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// LSTM over `[n, T, input_dim]` batches, returning every hidden state
/// (`[n, T, hidden_dim]`). The initial hidden and cell states are zero.
///
/// Per step:
///
/// ```text
/// i = σ(x W_i + h U_i + b_i)    f = σ(x W_f + h U_f + b_f)
/// o = σ(x W_o + h U_o + b_o)    g = tanh(x W_g + h U_g + b_g)
/// c' = f ⊙ c + i ⊙ g            h' = o ⊙ tanh(c')
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Input weights `[input_dim, hidden_dim]` for the i, f, o, g gates.
    pub w: [Tensor; 4],
    /// Recurrent weights `[hidden_dim, hidden_dim]`, same gate order.
    pub u: [Tensor; 4],
    /// Biases `[hidden_dim]`, same gate order.
    pub b: [Tensor; 4],
}

const GATE_I: usize = 0;
const GATE_F: usize = 1;
const GATE_O: usize = 2;
const GATE_G: usize = 3;

impl LstmLayer {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = Tensor::zeros(vec![input_dim, hidden_dim]);
        let u = Tensor::zeros(vec![hidden_dim, hidden_dim]);
        let b = Tensor::zeros(vec![hidden_dim]);
        Self {
            input_dim,
            hidden_dim,
            w: [w.clone(), w.clone(), w.clone(), w],
            u: [u.clone(), u.clone(), u.clone(), u],
            b: [b.clone(), b.clone(), b.clone(), b],
        }
    }

    /// Glorot-uniform weights, zero biases except the forget gate (1.0).
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut SeededRng) -> Self {
        let mut layer = Self::zeros(input_dim, hidden_dim);
        for w in &mut layer.w {
            *w = rng.glorot(&[input_dim, hidden_dim], input_dim, hidden_dim);
        }
        for u in &mut layer.u {
            *u = rng.glorot(&[hidden_dim, hidden_dim], hidden_dim, hidden_dim);
        }
        layer.b[GATE_F] = Tensor::full(vec![hidden_dim], 1.0);
        layer
    }

    /// One recurrence step on `[n, input_dim]` with state `[n, hidden_dim]`.
    /// `h` is `None` for the zero initial state, which skips the recurrent
    /// products.
    pub fn cell(
        &self,
        tape: &mut Tape,
        p: &[Var],
        x: Var,
        h: Option<Var>,
        c: Option<Var>,
    ) -> Result<(Var, Var)> {
        let (w, u, b) = (&p[0..4], &p[4..8], &p[8..12]);
        let mut pre = [x; 4];
        for gate in 0..4 {
            let mut z = tape.matmul(x, w[gate])?;
            if let Some(h) = h {
                let r = tape.matmul(h, u[gate])?;
                z = tape.add(z, r)?;
            }
            pre[gate] = tape.add(z, b[gate])?;
        }
        let i = tape.sigmoid(pre[GATE_I]);
        let f = tape.sigmoid(pre[GATE_F]);
        let o = tape.sigmoid(pre[GATE_O]);
        let g = tape.tanh(pre[GATE_G]);
        let ig = tape.mul(i, g)?;
        let c_next = match c {
            Some(c) => {
                let fc = tape.mul(f, c)?;
                tape.add(fc, ig)?
            }
            None => ig,
        };
        let tc = tape.tanh(c_next);
        let h_next = tape.mul(o, tc)?;
        Ok((h_next, c_next))
    }

    /// `lstm_step` on plain vectors: `x: [input_dim]`, `h, c: [hidden_dim]`.
    pub fn step(&self, x: &Tensor, h: &Tensor, c: &Tensor) -> Result<(Tensor, Tensor)> {
        let expect = |t: &Tensor, n: usize| {
            if t.shape() != [n] {
                Err(Error::Shape {
                    op: "lstm_step",
                    left: t.shape().to_vec(),
                    right: vec![n],
                })
            } else {
                Ok(())
            }
        };
        expect(x, self.input_dim)?;
        expect(h, self.hidden_dim)?;
        expect(c, self.hidden_dim)?;
        let mut tape = Tape::new();
        let p: Vec<Var> = self
            .params()
            .into_iter()
            .map(|t| tape.constant(t.clone()))
            .collect();
        let xv = tape.constant(x.reshape(vec![1, self.input_dim])?);
        let hv = tape.constant(h.reshape(vec![1, self.hidden_dim])?);
        let cv = tape.constant(c.reshape(vec![1, self.hidden_dim])?);
        let (h2, c2) = self.cell(&mut tape, &p, xv, Some(hv), Some(cv))?;
        Ok((
            tape.value(h2).reshape(vec![self.hidden_dim])?,
            tape.value(c2).reshape(vec![self.hidden_dim])?,
        ))
    }

    /// `lstm_forward` on one sequence `[T, input_dim]` → `[T, hidden_dim]`.
    pub fn forward_sequence(&self, seq: &Tensor) -> Result<Tensor> {
        if seq.rank() != 2 {
            return Err(Error::Invalid(alloc::format!(
                "sequence must be [T, input_dim], got {:?}",
                seq.shape()
            )));
        }
        let steps = seq.shape()[0];
        let out = eval_layer(self, &seq.reshape(vec![1, steps, seq.shape()[1]])?)?;
        out.reshape(vec![steps, self.hidden_dim])
    }
}

impl Layer for LstmLayer {
    fn param_names(&self) -> Vec<String> {
        super::names(&[
            "w_i", "w_f", "w_o", "w_g", "u_i", "u_f", "u_o", "u_g", "b_i", "b_f", "b_o", "b_g",
        ])
    }

    fn params(&self) -> Vec<&Tensor> {
        self.w.iter().chain(&self.u).chain(&self.b).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.w
            .iter_mut()
            .chain(self.u.iter_mut())
            .chain(self.b.iter_mut())
            .collect()
    }

    fn apply(&self, tape: &mut Tape, p: &[Var], x: Var) -> Result<Var> {
        let s = tape.value(x).shape().to_vec();
        if s.len() != 3 || s[2] != self.input_dim {
            return Err(Error::Shape {
                op: "lstm_forward",
                left: s,
                right: vec![self.input_dim],
            });
        }
        if s[1] == 0 {
            return Err(Error::Empty("lstm_forward needs at least one time step"));
        }
        let mut h = None;
        let mut c = None;
        let mut outputs = Vec::with_capacity(s[1]);
        for t in 0..s[1] {
            let xt = tape.step(x, t)?;
            let (h2, c2) = self.cell(tape, p, xt, h, c)?;
            outputs.push(h2);
            h = Some(h2);
            c = Some(c2);
        }
        tape.stack_steps(&outputs)
    }
}
