//! A small feed-forward classifier whose `K + 1` softmax outputs are read as
//! the belief and uncertainty masses of an opinion.

mod io;
mod loss;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SleError};
use crate::opinion::Opinion;

pub use io::{read_model, write_model, MODEL_FORMAT_VERSION};
pub use loss::{loss_cross_entropy, loss_forward_kl, loss_reverse_kl, LossKind, LossValue, CE_PROBABILITY_FLOOR};
pub use train::{grad, mean_loss, train, Gradient, Sample, TrainConfig, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output `h`.
    fn derivative_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

/// One affine map `W x + b` with `W` stored row-major (`outputs x inputs`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect()
    }
}

/// Parameters of the layer stack. The final layer has `K + 1` outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub k: usize,
    pub activation: Activation,
    pub layers: Vec<Layer>,
}

impl ModelParams {
    /// All-zero parameters; every input maps to the uniform softmax.
    pub fn zeros(k: usize, input_dim: usize, hidden: &[usize], activation: Activation) -> Self {
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(k + 1);
        let layers = widths.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        ModelParams { k, activation, layers }
    }

    /// Glorot-uniform weights and zero biases drawn from `seed`.
    pub fn init(k: usize, input_dim: usize, hidden: &[usize], activation: Activation, seed: u64) -> Self {
        let mut params = Self::zeros(k, input_dim, hidden, activation);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut params.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        params
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters in storage order: per layer, weights then bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(SleError::DimensionMismatch {
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let (nw, nb) = (l.weights.len(), l.bias.len());
            l.weights.copy_from_slice(&flat[offset..offset + nw]);
            l.bias.copy_from_slice(&flat[offset + nw..offset + nw + nb]);
            offset += nw + nb;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let last = self.layers.last().ok_or(SleError::Empty("model has no layers"))?;
        if last.outputs != self.k + 1 {
            return Err(SleError::DimensionMismatch {
                expected: self.k + 1,
                got: last.outputs,
            });
        }
        for pair in self.layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(SleError::DimensionMismatch {
                    expected: pair[0].outputs,
                    got: pair[1].inputs,
                });
            }
        }
        for l in &self.layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(SleError::Domain("layer storage does not match its shape".into()));
            }
        }
        if let Some(i) = self.to_flat().iter().position(|v| !v.is_finite()) {
            return Err(SleError::NonFinite { what: "parameter", index: i });
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(SleError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(SleError::NonFinite { what: "feature", index: i });
        }
        Ok(())
    }

    /// Hidden activations per layer input plus the final softmax output.
    fn forward_trace(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&h);
            inputs.push(std::mem::replace(
                &mut h,
                if i + 1 == self.layers.len() {
                    z
                } else {
                    z.into_iter().map(|v| self.activation.apply(v)).collect()
                },
            ));
        }
        (inputs, softmax(&h))
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

pub(crate) fn opinion_from_softmax(s: &[f64]) -> Result<Opinion> {
    let k = s.len() - 1;
    Opinion::with_uniform_base(s[..k].to_vec(), s[k])
}

/// Predicted opinion: softmax over the `K + 1` outputs, the first `K` read
/// as beliefs and the last as uncertainty, with a uniform base rate.
pub fn forward(x: &[f64], params: &ModelParams) -> Result<Opinion> {
    params.check_input(x)?;
    let (_, s) = params.forward_trace(x);
    opinion_from_softmax(&s)
}
