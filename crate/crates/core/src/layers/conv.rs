use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{eval_layer, Layer};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// 1-D convolution along the time axis with "same" padding: the input is
/// zero-padded on the right by `kernel_size - 1`, so `T` is preserved even
/// when `T < kernel_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dLayer {
    pub in_channels: usize,
    pub filters: usize,
    pub kernel_size: usize,
    /// `[filters, in_channels, kernel_size]`
    pub weights: Tensor,
    /// `[filters]`
    pub bias: Tensor,
}

impl Conv1dLayer {
    pub fn zeros(in_channels: usize, filters: usize, kernel_size: usize) -> Result<Self> {
        if kernel_size == 0 {
            return Err(Error::Invalid("kernel_size must be at least 1".into()));
        }
        Ok(Self {
            in_channels,
            filters,
            kernel_size,
            weights: Tensor::zeros(vec![filters, in_channels, kernel_size]),
            bias: Tensor::zeros(vec![filters]),
        })
    }

    pub fn init(
        in_channels: usize,
        filters: usize,
        kernel_size: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let mut layer = Self::zeros(in_channels, filters, kernel_size)?;
        layer.weights = rng.glorot(
            &[filters, in_channels, kernel_size],
            in_channels * kernel_size,
            filters * kernel_size,
        );
        Ok(layer)
    }

    /// `conv1d_forward` on one sequence `[T, in_channels]` → `[T, filters]`.
    pub fn forward_sequence(&self, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 2 {
            return Err(Error::Invalid(alloc::format!(
                "sequence must be [T, channels], got {:?}",
                x.shape()
            )));
        }
        let steps = x.shape()[0];
        let out = eval_layer(self, &x.reshape(vec![1, steps, x.shape()[1]])?)?;
        out.reshape(vec![steps, self.filters])
    }
}

impl Layer for Conv1dLayer {
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
        if s.len() != 3 || s[2] != self.in_channels {
            return Err(Error::Shape {
                op: "conv1d_forward",
                left: s.to_vec(),
                right: vec![self.in_channels],
            });
        }
        if s[1] == 0 {
            return Err(Error::Empty("conv1d_forward needs at least one time step"));
        }
        let y = tape.conv1d_same(x, p[0])?;
        tape.add(y, p[1])
    }
}

/// Non-overlapping max pooling over time. `pool_size == 1` is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool1d {
    pub pool_size: usize,
}

impl MaxPool1d {
    pub fn new(pool_size: usize) -> Self {
        Self { pool_size }
    }

    /// `maxpool_forward` on one sequence `[T, channels]`.
    pub fn forward_sequence(&self, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 2 {
            return Err(Error::Invalid(alloc::format!(
                "sequence must be [T, channels], got {:?}",
                x.shape()
            )));
        }
        let (steps, c) = (x.shape()[0], x.shape()[1]);
        let out = eval_layer(self, &x.reshape(vec![1, steps, c])?)?;
        let out_steps = out.shape()[1];
        out.reshape(vec![out_steps, c])
    }
}

impl Layer for MaxPool1d {
    fn param_names(&self) -> Vec<String> {
        Vec::new()
    }

    fn params(&self) -> Vec<&Tensor> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        Vec::new()
    }

    fn apply(&self, tape: &mut Tape, _p: &[Var], x: Var) -> Result<Var> {
        tape.max_pool_time(x, self.pool_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{check, GradCheck};
    use proptest::prelude::*;

    #[test]
    fn kernel_one_identity() {
        let mut l = Conv1dLayer::zeros(1, 1, 1).unwrap();
        l.weights = Tensor::full(vec![1, 1, 1], 1.0);
        let x = Tensor::new(vec![4, 1], vec![1.0, -2.0, 3.5, 0.25]).unwrap();
        assert_eq!(l.forward_sequence(&x).unwrap(), x);
    }

    #[test]
    fn same_padding_hand_case() {
        let mut l = Conv1dLayer::zeros(1, 1, 2).unwrap();
        l.weights = Tensor::new(vec![1, 1, 2], vec![1.0, -1.0]).unwrap();
        let x = Tensor::new(vec![3, 1], vec![3.0, 5.0, 9.0]).unwrap();
        assert_eq!(l.forward_sequence(&x).unwrap().data(), &[-2.0, -4.0, 9.0]);
    }

    #[test]
    fn single_step_with_kernel_two() {
        let mut rng = SeededRng::new(2);
        let l = Conv1dLayer::init(64, 32, 2, &mut rng).unwrap();
        let x = rng.glorot(&[1, 64], 1, 1);
        let y = l.forward_sequence(&x).unwrap();
        assert_eq!(y.shape(), &[1, 32]);
        // only the first tap sees data
        for f in 0..32 {
            let want: f64 = (0..64)
                .map(|c| l.weights.get(&[f, c, 0]) * x.get(&[0, c]))
                .sum();
            assert!((y.get(&[0, f]) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_mismatch() {
        let l = Conv1dLayer::zeros(3, 2, 2).unwrap();
        assert!(matches!(
            l.forward_sequence(&Tensor::zeros(vec![4, 2])),
            Err(Error::Shape { .. })
        ));
        assert!(Conv1dLayer::zeros(3, 2, 0).is_err());
    }

    #[test]
    fn pool_cases() {
        let x = Tensor::new(vec![4, 1], vec![1.0, 5.0, 3.0, 2.0]).unwrap();
        assert_eq!(
            MaxPool1d::new(2).forward_sequence(&x).unwrap().data(),
            &[5.0, 3.0]
        );
        assert_eq!(MaxPool1d::new(1).forward_sequence(&x).unwrap(), x);
        assert!(MaxPool1d::new(5).forward_sequence(&x).is_err());
    }

    #[test]
    fn conv_gradients() {
        for seed in 0..10 {
            let mut rng = SeededRng::new(40 + seed);
            let l = Conv1dLayer::init(3, 4, 2, &mut rng).unwrap();
            let mut inputs: Vec<Tensor> = l.params().into_iter().cloned().collect();
            inputs.push(rng.glorot(&[2, 3, 3], 1, 1));
            inputs.push(rng.glorot(&[2, 3, 4], 1, 1));
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

    proptest! {
        #[test]
        fn pool_one_is_identity(steps in 1usize..6, c in 1usize..5, seed in any::<u64>()) {
            let mut rng = SeededRng::new(seed);
            let x = rng.glorot(&[steps, c], 1, 1);
            prop_assert_eq!(MaxPool1d::new(1).forward_sequence(&x).unwrap(), x);
        }
    }
}
