use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::flatten_batch;
use crate::error::{Error, Result};
use crate::layers::{
    Activation, Conv1dLayer, DenseLayer, Layer, LstmLayer, MaxPool1d, TransformerBlock,
};
use crate::rng::SeededRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Dimensions of the hybrid stack. [`HybridConfig::new`] gives the standard
/// sizes; smaller ones are handy for gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HybridConfig {
    pub features: usize,
    pub time_steps: usize,
    pub lstm_hidden: usize,
    pub conv_filters: usize,
    pub kernel_size: usize,
    pub pool_size: usize,
    pub heads: usize,
    pub ffn_dim: usize,
}

impl HybridConfig {
    /// LSTM 64, Conv1D 32 filters / kernel 2, pool 1, 4 heads, FFN 64,
    /// one time step.
    pub fn new(features: usize) -> Self {
        Self {
            features,
            time_steps: 1,
            lstm_hidden: 64,
            conv_filters: 32,
            kernel_size: 2,
            pool_size: 1,
            heads: 4,
            ffn_dim: 64,
        }
    }

    fn pooled_steps(&self) -> usize {
        self.time_steps / self.pool_size.max(1)
    }

    /// Closed-form parameter count, with `f` features, `H` LSTM units, `F`
    /// filters, kernel `K`, FFN width `D` and `S` pooled steps:
    ///
    /// ```text
    /// 4(fH + H² + H)          LSTM
    /// + FHK + F               Conv1D
    /// + 4F²                   attention projections
    /// + 4F                    two layer norms
    /// + FD + D + DF + F       feed-forward
    /// + SF + 1                output head
    /// ```
    ///
    /// For the standard sizes and `f = 9` this is 31 521.
    pub fn param_count(&self) -> usize {
        let (f, h, c, k, d, s) = (
            self.features,
            self.lstm_hidden,
            self.conv_filters,
            self.kernel_size,
            self.ffn_dim,
            self.pooled_steps(),
        );
        4 * (f * h + h * h + h)
            + (c * h * k + c)
            + 4 * c * c
            + 4 * c
            + (c * d + d + d * c + c)
            + (s * c + 1)
    }
}

/// LSTM → Conv1D (same padding) → MaxPool → Transformer block → flatten →
/// linear head. Maps `[n, T, f]` to `[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridModel {
    pub config: HybridConfig,
    pub lstm: LstmLayer,
    pub conv: Conv1dLayer,
    pub pool: MaxPool1d,
    pub transformer: TransformerBlock,
    pub head: DenseLayer,
}

const LSTM_PARAMS: usize = 12;
const CONV_PARAMS: usize = 2;
const BLOCK_PARAMS: usize = 12;

impl HybridModel {
    fn validate(config: &HybridConfig) -> Result<()> {
        if config.time_steps == 0 || config.pool_size == 0 || config.pool_size > config.time_steps {
            return Err(Error::Invalid(alloc::format!(
                "pool size {} must be in 1..={} time steps",
                config.pool_size,
                config.time_steps
            )));
        }
        Ok(())
    }

    pub fn zeros(config: HybridConfig) -> Result<Self> {
        Self::validate(&config)?;
        Ok(Self {
            config,
            lstm: LstmLayer::zeros(config.features, config.lstm_hidden),
            conv: Conv1dLayer::zeros(config.lstm_hidden, config.conv_filters, config.kernel_size)?,
            pool: MaxPool1d::new(config.pool_size),
            transformer: TransformerBlock::zeros(
                config.conv_filters,
                config.heads,
                config.ffn_dim,
            )?,
            head: DenseLayer::zeros(
                config.pooled_steps() * config.conv_filters,
                1,
                Activation::Linear,
            ),
        })
    }

    pub fn init(config: HybridConfig, rng: &mut SeededRng) -> Result<Self> {
        Self::validate(&config)?;
        Ok(Self {
            config,
            lstm: LstmLayer::init(config.features, config.lstm_hidden, rng),
            conv: Conv1dLayer::init(
                config.lstm_hidden,
                config.conv_filters,
                config.kernel_size,
                rng,
            )?,
            pool: MaxPool1d::new(config.pool_size),
            transformer: TransformerBlock::init(
                config.conv_filters,
                config.heads,
                config.ffn_dim,
                rng,
            )?,
            head: DenseLayer::init(
                config.pooled_steps() * config.conv_filters,
                1,
                Activation::Linear,
                rng,
            ),
        })
    }
}

impl Layer for HybridModel {
    fn param_names(&self) -> Vec<String> {
        let parts: [(&str, &dyn Layer); 4] = [
            ("lstm", &self.lstm),
            ("conv", &self.conv),
            ("transformer", &self.transformer),
            ("head", &self.head),
        ];
        parts
            .iter()
            .flat_map(|(prefix, layer)| {
                layer
                    .param_names()
                    .into_iter()
                    .map(move |n| alloc::format!("{prefix}.{n}"))
            })
            .collect()
    }

    fn params(&self) -> Vec<&Tensor> {
        let mut out = self.lstm.params();
        out.extend(self.conv.params());
        out.extend(self.transformer.params());
        out.extend(self.head.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.lstm.params_mut();
        out.extend(self.conv.params_mut());
        out.extend(self.transformer.params_mut());
        out.extend(self.head.params_mut());
        out
    }

    fn apply(&self, tape: &mut Tape, p: &[Var], x: Var) -> Result<Var> {
        let s = tape.value(x).shape().to_vec();
        if s.len() != 3 || s[1] != self.config.time_steps || s[2] != self.config.features {
            return Err(Error::Shape {
                op: "hybrid_forward",
                left: s,
                right: vec![self.config.time_steps, self.config.features],
            });
        }
        let n = s[0];
        let (lstm_p, rest) = p.split_at(LSTM_PARAMS);
        let (conv_p, rest) = rest.split_at(CONV_PARAMS);
        let (block_p, head_p) = rest.split_at(BLOCK_PARAMS);

        let h = self.lstm.apply(tape, lstm_p, x)?;
        let c = self.conv.apply(tape, conv_p, h)?;
        let c = self.pool.apply(tape, &[], c)?;
        let t = self.transformer.apply(tape, block_p, c)?;
        let flat = flatten_batch(tape, t, self.head.inputs(), "hybrid_flatten")?;
        let y = self.head.apply(tape, head_p, flat)?;
        tape.reshape(y, vec![n])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{check, GradCheck};
    use crate::layers::Graph;
    use crate::models::{Model, Predictor};

    fn small() -> HybridConfig {
        HybridConfig {
            features: 3,
            time_steps: 1,
            lstm_hidden: 5,
            conv_filters: 4,
            kernel_size: 2,
            pool_size: 1,
            heads: 2,
            ffn_dim: 6,
        }
    }

    #[test]
    fn standard_param_count() {
        let cfg = HybridConfig::new(9);
        // 4(9·64 + 64² + 64) + (32·64·2 + 32) + 4·32² + 4·32 + (32·64 + 64 + 64·32 + 32) + (32 + 1)
        assert_eq!(cfg.param_count(), 18_944 + 4_128 + 4_096 + 128 + 4_192 + 33);
        assert_eq!(cfg.param_count(), 31_521);
        let m = HybridModel::init(cfg, &mut SeededRng::new(1)).unwrap();
        assert_eq!(m.param_count(), 31_521);
        assert_eq!(m.param_names().len(), m.params().len());
        let m = HybridModel::init(small(), &mut SeededRng::new(1)).unwrap();
        assert_eq!(m.param_count(), small().param_count());
    }

    #[test]
    fn output_shape_and_feature_check() {
        let m =
            Model::Hybrid(HybridModel::init(HybridConfig::new(9), &mut SeededRng::new(2)).unwrap());
        let x = SeededRng::new(3).glorot(&[7, 1, 9], 1, 1);
        assert_eq!(m.predict(&x).unwrap().len(), 7);
        assert!(matches!(
            m.predict(&Tensor::zeros(vec![2, 1, 8])),
            Err(Error::Shape {
                op: "hybrid_forward",
                ..
            })
        ));
    }

    #[test]
    fn zero_parameters_give_head_bias_modulo_norm_shift() {
        let mut m = HybridModel::zeros(small()).unwrap();
        for ln in [&mut m.transformer.norm1, &mut m.transformer.norm2] {
            ln.gamma = Tensor::zeros(vec![4]);
        }
        m.head.bias = Tensor::scalar(0.75);
        let x = SeededRng::new(4).glorot(&[5, 1, 3], 1, 1);
        let y = Model::Hybrid(m.clone()).predict(&x).unwrap();
        assert!(y.iter().all(|&v| v == 0.75));

        // With a layer-norm shift β2 the head sees β2 at every position:
        // out = head_w · β2 + head_b.
        let beta2 = Tensor::from_vec(vec![0.1, -0.2, 0.3, 0.4]).unwrap();
        m.transformer.norm2.beta = beta2.clone();
        m.head.weights = Tensor::new(vec![4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let want = 0.1 - 0.4 + 0.9 + 1.6 + 0.75;
        let y = Model::Hybrid(m).predict(&x).unwrap();
        assert!(y.iter().all(|&v| (v - want).abs() < 1e-12));
    }

    #[test]
    fn end_to_end_gradients() {
        for seed in 0..10 {
            let mut rng = SeededRng::new(900 + seed);
            let m = HybridModel::init(small(), &mut rng).unwrap();
            let mut inputs: Vec<Tensor> = m.params().into_iter().cloned().collect();
            inputs.push(rng.glorot(&[4, 1, 3], 1, 1).map(|v| v * 2.0));
            inputs.push(rng.glorot(&[4], 1, 1));
            let np = inputs.len() - 2;
            let report = check(
                &inputs,
                |t, v| {
                    let y = m.apply(t, &v[..np], v[np])?;
                    let d = t.sub(y, v[np + 1])?;
                    let sq = t.mul(d, d)?;
                    t.mean(sq)
                },
                &GradCheck::default(),
            )
            .unwrap();
            assert!(report.max_rel_err < 1e-4, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn multi_step_pooling_variant_runs() {
        let cfg = HybridConfig {
            time_steps: 4,
            pool_size: 2,
            ..small()
        };
        let m = HybridModel::init(cfg, &mut SeededRng::new(5)).unwrap();
        let mut g = Graph::inference();
        let x = g.input(SeededRng::new(6).glorot(&[3, 4, 3], 1, 1));
        let y = m.forward(&mut g, x).unwrap();
        assert_eq!(g.tape.value(y).shape(), &[3]);
        assert!(HybridModel::zeros(HybridConfig {
            pool_size: 5,
            ..cfg
        })
        .is_err());
    }
}
