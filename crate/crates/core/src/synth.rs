//! Synthetic crowd annotations: true labels on a simplex grid, corrupted by
//! per-annotator reliability (random permutation) and confidence
//! (recalibration towards uniform).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::encoding::{AnnotationRecord, Label};
use crate::error::{Result, SleError};
use crate::seed::derive_seed;

const RECALIBRATION_FLOOR: f64 = 1e-12;

/// Beta distribution parameters `(alpha, beta)`.
///
/// A zero `beta` is the point mass at 1 and a zero `alpha` the point mass at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams(pub f64, pub f64);

impl BetaParams {
    pub const NONE: BetaParams = BetaParams(10.0, 0.0);
    pub const LOW: BetaParams = BetaParams(10.0, 1.0);
    pub const MEDIUM: BetaParams = BetaParams(10.0, 10.0);
    pub const HIGH: BetaParams = BetaParams(1.0, 10.0);

    /// The four annotation-uncertainty levels, from none to high.
    pub const LEVELS: [BetaParams; 4] = [Self::NONE, Self::LOW, Self::MEDIUM, Self::HIGH];

    pub fn validate(self) -> Result<()> {
        let BetaParams(a, b) = self;
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
            return Err(SleError::Config(format!("Beta parameters must be finite and >= 0, got ({a}, {b})")));
        }
        if a == 0.0 && b == 0.0 {
            return Err(SleError::Config("Beta(0, 0) is not a distribution".into()));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> Result<f64> {
        self.validate()?;
        match self {
            BetaParams(_, 0.0) => Ok(1.0),
            BetaParams(0.0, _) => Ok(0.0),
            BetaParams(a, b) => {
                let dist = Beta::new(a, b).map_err(|e| SleError::Config(e.to_string()))?;
                Ok(dist.sample(rng))
            }
        }
    }

    pub fn mean(self) -> f64 {
        let BetaParams(a, b) = self;
        a / (a + b)
    }

    /// Componentwise linear interpolation.
    pub fn lerp(self, other: BetaParams, t: f64) -> BetaParams {
        BetaParams(self.0 + t * (other.0 - self.0), self.1 + t * (other.1 - self.1))
    }
}

/// How reliability turns into a permutation probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationRule {
    /// Permute with probability `1 - r`; `r = 1` never corrupts.
    #[default]
    Unreliability,
    /// Permute with probability `r`.
    Reliability,
}

fn default_k() -> usize {
    5
}
fn default_m() -> usize {
    10
}
fn default_resolution() -> usize {
    6
}
fn default_runs() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_resolution")]
    pub grid_resolution: usize,
    pub confidence_beta: BetaParams,
    pub reliability_beta: BetaParams,
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub permutation_rule: PermutationRule,
}

impl SyntheticConfig {
    pub fn new(confidence_beta: BetaParams, reliability_beta: BetaParams, seed: u64) -> Self {
        SyntheticConfig {
            k: default_k(),
            m: default_m(),
            grid_resolution: default_resolution(),
            confidence_beta,
            reliability_beta,
            seed,
            runs: default_runs(),
            permutation_rule: PermutationRule::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: SyntheticConfig = toml::from_str(text).map_err(|e| SleError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(SleError::Config(format!("k must be >= 2, got {}", self.k)));
        }
        if self.m < 1 {
            return Err(SleError::Config("m must be >= 1".into()));
        }
        if self.grid_resolution < 1 {
            return Err(SleError::Config("grid_resolution must be >= 1".into()));
        }
        if self.runs < 1 {
            return Err(SleError::Config("runs must be >= 1".into()));
        }
        self.confidence_beta.validate()?;
        self.reliability_beta.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorProfile {
    pub confidence: f64,
    pub reliability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub k: usize,
    pub true_labels: Vec<Vec<f64>>,
    /// Sorted by item, then annotator.
    pub annotations: Vec<AnnotationRecord>,
    pub annotator_profiles: Vec<AnnotatorProfile>,
}

/// All points `n / resolution` with `n` a composition of `resolution` into
/// `k` non-negative parts, in lexicographic order of `n`.
pub fn simplex_grid(k: usize, resolution: usize) -> Vec<Vec<f64>> {
    fn fill(prefix: &mut Vec<usize>, remaining: usize, slots: usize, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for n in 0..=remaining {
            prefix.push(n);
            fill(prefix, remaining - n, slots - 1, out);
            prefix.pop();
        }
    }
    if k == 0 {
        return Vec::new();
    }
    let mut parts = Vec::new();
    fill(&mut Vec::with_capacity(k), resolution, k, &mut parts);
    let res = resolution as f64;
    parts
        .into_iter()
        .map(|p| p.into_iter().map(|n| n as f64 / res).collect())
        .collect()
}

/// Draws an annotator's `(confidence, reliability)`.
pub fn sample_profile<R: Rng + ?Sized>(confidence: BetaParams, reliability: BetaParams, rng: &mut R) -> Result<AnnotatorProfile> {
    Ok(AnnotatorProfile {
        confidence: confidence.sample(rng)?,
        reliability: reliability.sample(rng)?,
    })
}

/// Shuffles `y` by a uniform random permutation with probability `1 - r`.
pub fn permute_label<R: Rng + ?Sized>(y: &[f64], reliability: f64, rng: &mut R) -> Vec<f64> {
    permute_with_probability(y, 1.0 - reliability, rng)
}

pub fn permute_with_probability<R: Rng + ?Sized>(y: &[f64], probability: f64, rng: &mut R) -> Vec<f64> {
    let mut out = y.to_vec();
    if rng.random_bool(probability.clamp(0.0, 1.0)) {
        out.shuffle(rng);
    }
    out
}

/// `exp(c ln y_i) / Σ_j exp(c ln y_j)`; identity at `c = 1`, uniform at `c = 0`.
///
/// Zero components are floored at 1e-12 before taking logs.
pub fn recalibrate(y: &[f64], confidence: f64) -> Vec<f64> {
    if confidence == 1.0 {
        return y.to_vec();
    }
    let logits: Vec<f64> = y.iter().map(|v| confidence * v.max(RECALIBRATION_FLOOR).ln()).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Runs the generative process once for `config.seed`.
///
/// Each annotator draws from its own stream derived from the seed, so the
/// output does not depend on the order annotators are processed in.
pub fn generate(config: &SyntheticConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let grid = simplex_grid(config.k, config.grid_resolution);
    let mut per_annotator = Vec::with_capacity(config.m);
    let mut profiles = Vec::with_capacity(config.m);
    for m in 0..config.m {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, m as u64));
        let profile = sample_profile(config.confidence_beta, config.reliability_beta, &mut rng)?;
        let permute_prob = match config.permutation_rule {
            PermutationRule::Unreliability => 1.0 - profile.reliability,
            PermutationRule::Reliability => profile.reliability,
        };
        let labels: Vec<Vec<f64>> = grid
            .iter()
            .map(|y| recalibrate(&permute_with_probability(y, permute_prob, &mut rng), profile.confidence))
            .collect();
        per_annotator.push(labels);
        profiles.push(profile);
    }
    let mut annotations = Vec::with_capacity(grid.len() * config.m);
    for item in 0..grid.len() {
        for (m, labels) in per_annotator.iter_mut().enumerate() {
            annotations.push(AnnotationRecord {
                item_id: item as u64,
                annotator_id: m as u64,
                label: Label::Distribution(std::mem::take(&mut labels[item])),
                confidence: Some(profiles[m].confidence),
                reliability: Some(profiles[m].reliability),
            });
        }
    }
    Ok(SyntheticDataset {
        k: config.k,
        true_labels: grid,
        annotations,
        annotator_profiles: profiles,
    })
}
