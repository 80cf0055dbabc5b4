use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_and_output_grad, LossKind};
use super::{Activation, ModelParams};
use crate::error::{Result, SleError};
use crate::opinion::{Opinion, DEFAULT_EPSILON};
use crate::seed::derive_seed;

/// A feature vector and the opinion it should be mapped to.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub target: Opinion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Applied to dogmatic targets before a KL loss maps them to a Dirichlet.
    pub epsilon_smooth: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Share of items held out for evaluation by the experiment harness.
    pub holdout_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::CrossEntropy,
            learning_rate: 0.1,
            epochs: 200,
            batch_size: 32,
            epsilon_smooth: DEFAULT_EPSILON,
            seed: 0,
            hidden: Vec::new(),
            activation: Activation::Tanh,
            holdout_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: TrainConfig = toml::from_str(text).map_err(|e| SleError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(SleError::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(SleError::Config("batch_size must be at least 1".into()));
        }
        if !(self.epsilon_smooth > 0.0 && self.epsilon_smooth < 1.0) {
            return Err(SleError::Config(format!("epsilon_smooth must lie in (0, 1), got {}", self.epsilon_smooth)));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(SleError::Config(format!("holdout_fraction must lie in [0, 1), got {}", self.holdout_fraction)));
        }
        if self.hidden.contains(&0) {
            return Err(SleError::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    /// Freshly initialised parameters for this configuration.
    pub fn initial_params(&self, k: usize, input_dim: usize) -> ModelParams {
        ModelParams::init(k, input_dim, &self.hidden, self.activation, derive_seed(self.seed, 0))
    }
}

/// Mean loss and its gradient over a batch, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub loss: f64,
    pub params: ModelParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean full-data loss before training and after each epoch.
    pub loss_trace: Vec<f64>,
}

fn check_samples(params: &ModelParams, samples: &[Sample]) -> Result<()> {
    if samples.is_empty() {
        return Err(SleError::Empty("no training samples"));
    }
    for s in samples {
        params.check_input(&s.features)?;
        if s.target.k() != params.k {
            return Err(SleError::DimensionMismatch {
                expected: params.k,
                got: s.target.k(),
            });
        }
    }
    Ok(())
}

/// Analytic gradient of the mean batch loss.
pub fn grad(params: &ModelParams, batch: &[Sample], loss: LossKind) -> Result<Gradient> {
    check_samples(params, batch)?;
    let mut acc = ModelParams::zeros(params.k, params.input_dim(), &[], params.activation);
    acc.layers = params
        .layers
        .iter()
        .map(|l| super::Layer::zeros(l.inputs, l.outputs))
        .collect();
    let mut total = 0.0;
    for sample in batch {
        let (inputs, s) = params.forward_trace(&sample.features);
        let (l, g) = loss_and_output_grad(loss, &sample.target, &s)?;
        total += l;
        let dot: f64 = g.iter().zip(&s).map(|(a, b)| a * b).sum();
        let mut delta: Vec<f64> = s.iter().zip(&g).map(|(si, gi)| si * (gi - dot)).collect();
        for li in (0..params.layers.len()).rev() {
            let layer = &params.layers[li];
            let input = &inputs[li];
            let out = &mut acc.layers[li];
            for (o, d) in delta.iter().enumerate() {
                out.bias[o] += d;
                let row = &mut out.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (w, x) in row.iter_mut().zip(input) {
                    *w += d * x;
                }
            }
            if li > 0 {
                let mut back = vec![0.0; layer.inputs];
                for (o, d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (b, w) in back.iter_mut().zip(row) {
                        *b += w * d;
                    }
                }
                for (b, h) in back.iter_mut().zip(input) {
                    *b *= params.activation.derivative_from_output(*h);
                }
                delta = back;
            }
        }
    }
    let n = batch.len() as f64;
    let mut flat = acc.to_flat();
    for (i, v) in flat.iter_mut().enumerate() {
        *v /= n;
        if !v.is_finite() {
            return Err(SleError::NonFinite { what: "gradient", index: i });
        }
    }
    acc.set_flat(&flat)?;
    Ok(Gradient {
        loss: total / n,
        params: acc,
    })
}

/// Mean loss over `samples`.
pub fn mean_loss(params: &ModelParams, samples: &[Sample], loss: LossKind) -> Result<f64> {
    check_samples(params, samples)?;
    let mut total = 0.0;
    for sample in samples {
        let (_, s) = params.forward_trace(&sample.features);
        total += loss_and_output_grad(loss, &sample.target, &s)?.0;
    }
    Ok(total / samples.len() as f64)
}

/// Minibatch gradient descent from `initial`. Dogmatic targets are smoothed
/// first when the loss is a KL divergence.
pub fn train(samples: &[Sample], config: &TrainConfig, initial: ModelParams) -> Result<TrainOutcome> {
    config.validate()?;
    initial.validate()?;
    let prepared: Vec<Sample>;
    let samples = if config.loss.is_kl() {
        prepared = samples
            .iter()
            .map(|s| {
                Ok(Sample {
                    features: s.features.clone(),
                    target: s.target.smooth_if_dogmatic(config.epsilon_smooth)?,
                })
            })
            .collect::<Result<_>>()?;
        &prepared[..]
    } else {
        samples
    };
    check_samples(&initial, samples)?;

    let mut params = initial;
    let mut flat = params.to_flat();
    let mut trace = vec![mean_loss(&params, samples, config.loss)?];
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 1));
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Sample> = chunk.iter().map(|&i| samples[i].clone()).collect();
            let g = grad(&params, &batch, config.loss)?;
            for (p, d) in flat.iter_mut().zip(g.params.to_flat()) {
                *p -= config.learning_rate * d;
            }
            params.set_flat(&flat)?;
        }
        let loss = mean_loss(&params, samples, config.loss)?;
        if !loss.is_finite() {
            log::warn!("training diverged at epoch {}", epoch + 1);
            return Err(SleError::NonFinite {
                what: "loss at epoch",
                index: epoch + 1,
            });
        }
        log::debug!("epoch {} loss {loss:.6}", epoch + 1);
        trace.push(loss);
    }
    Ok(TrainOutcome {
        params,
        loss_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward, loss_cross_entropy};
    use rand::Rng;

    fn random_opinion(rng: &mut ChaCha8Rng, k: usize, min_u: f64) -> Opinion {
        let raw: Vec<f64> = (0..=k).map(|_| rng.random::<f64>() + 1e-2).collect();
        let total: f64 = raw.iter().sum();
        let u = min_u + (1.0 - min_u) * raw[k] / total;
        let bsum: f64 = raw[..k].iter().sum();
        Opinion::with_uniform_base(raw[..k].iter().map(|v| v / bsum * (1.0 - u)).collect(), u).unwrap()
    }

    fn random_samples(rng: &mut ChaCha8Rng, n: usize, k: usize, d: usize) -> Vec<Sample> {
        (0..n)
            .map(|_| Sample {
                features: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
                target: random_opinion(rng, k, 0.05),
            })
            .collect()
    }

    fn finite_difference(params: &ModelParams, batch: &[Sample], loss: LossKind, i: usize) -> f64 {
        let h = 1e-5;
        let flat = params.to_flat();
        let mut p = params.clone();
        let mut plus = flat.clone();
        plus[i] += h;
        p.set_flat(&plus).unwrap();
        let lp = mean_loss(&p, batch, loss).unwrap();
        let mut minus = flat;
        minus[i] -= h;
        p.set_flat(&minus).unwrap();
        let lm = mean_loss(&p, batch, loss).unwrap();
        (lp - lm) / (2.0 * h)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for loss in [LossKind::CrossEntropy, LossKind::ForwardKl, LossKind::ReverseKl] {
            for (hidden, act) in [(vec![], Activation::Tanh), (vec![5], Activation::Tanh), (vec![4, 3], Activation::Relu)] {
                let params = ModelParams::init(3, 4, &hidden, act, rng.random());
                let batch = random_samples(&mut rng, 6, 3, 4);
                let g = grad(&params, &batch, loss).unwrap().params.to_flat();
                for (i, &a) in g.iter().enumerate() {
                    let n = finite_difference(&params, &batch, loss, i);
                    let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
                    assert!(rel < 1e-4, "{loss:?} {hidden:?} param {i}: {a} vs {n}");
                }
            }
        }
    }

    #[test]
    fn gradient_loss_matches_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = ModelParams::init(4, 2, &[3], Activation::Tanh, 9);
        let batch = random_samples(&mut rng, 5, 4, 2);
        let g = grad(&params, &batch, LossKind::CrossEntropy).unwrap();
        let direct: f64 = batch
            .iter()
            .map(|s| loss_cross_entropy(&s.target.project_probability(), &forward(&s.features, &params).unwrap()).value)
            .sum::<f64>()
            / 5.0;
        assert!((g.loss - direct).abs() < 1e-12);
    }

    #[test]
    fn full_batch_descent_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let samples = random_samples(&mut rng, 40, 3, 3);
        for loss in [LossKind::CrossEntropy, LossKind::ForwardKl, LossKind::ReverseKl] {
            let config = TrainConfig {
                loss,
                learning_rate: 1e-3,
                epochs: 100,
                batch_size: samples.len(),
                hidden: vec![4],
                ..TrainConfig::default()
            };
            let out = train(&samples, &config, config.initial_params(3, 3)).unwrap();
            for w in out.loss_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{loss:?}: {} -> {}", w[0], w[1]);
            }
            assert!(out.loss_trace.last().unwrap() < &out.loss_trace[0]);
        }
    }

    #[test]
    fn zero_epochs_returns_initial() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples = random_samples(&mut rng, 10, 2, 2);
        let config = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let init = config.initial_params(2, 2);
        let out = train(&samples, &config, init.clone()).unwrap();
        assert_eq!(out.params, init);
        assert_eq!(out.loss_trace.len(), 1);
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let samples = random_samples(&mut rng, 30, 3, 2);
        let config = TrainConfig {
            epochs: 5,
            batch_size: 7,
            seed: 99,
            hidden: vec![3],
            ..TrainConfig::default()
        };
        let a = train(&samples, &config, config.initial_params(3, 2)).unwrap();
        let b = train(&samples, &config, config.initial_params(3, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kl_training_smooths_dogmatic_targets() {
        let samples = vec![Sample {
            features: vec![1.0],
            target: Opinion::dogmatic(vec![1.0, 0.0]).unwrap(),
        }];
        let config = TrainConfig {
            loss: LossKind::ForwardKl,
            epochs: 3,
            ..TrainConfig::default()
        };
        assert!(train(&samples, &config, config.initial_params(2, 1)).is_ok());
        let params = config.initial_params(2, 1);
        assert!(matches!(grad(&params, &samples, LossKind::ForwardKl), Err(SleError::Dogmatic { .. })));
    }

    #[test]
    fn divergence_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let samples = random_samples(&mut rng, 20, 3, 2)
            .into_iter()
            .map(|mut s| {
                s.features.iter_mut().for_each(|x| *x *= 1e3);
                s
            })
            .collect::<Vec<_>>();
        let config = TrainConfig {
            loss: LossKind::ForwardKl,
            learning_rate: 1e6,
            epochs: 50,
            ..TrainConfig::default()
        };
        let err = train(&samples, &config, config.initial_params(3, 2)).unwrap_err();
        assert_eq!(err.kind(), crate::error::ErrorKind::Numerical);
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let parsed: std::result::Result<TrainConfig, _> = toml::from_str("loss = \"forward_kl\"\nlearnin_rate = 0.1");
        assert!(parsed.is_err());
        let parsed: TrainConfig = toml::from_str("loss = \"reverse_kl\"\nhidden = [8]").unwrap();
        assert_eq!(parsed.loss, LossKind::ReverseKl);
        assert_eq!(parsed.hidden, vec![8]);
    }
}
