//! Training and evaluating Dirichlet-output models on annotation datasets.
//!
//! Synthetic items carry no inputs of their own, so each item's true label
//! vector doubles as its feature vector.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::Dataset;
use crate::encoding::{build_sle, group_by_item};
use crate::error::{Result, SleError};
use crate::metrics::{predict_label, MetricReport};
use crate::model::{forward, train, ModelParams, Sample, TrainConfig};
use crate::seed::derive_seed;

/// Shuffles item indices with `seed` and returns `(train, held_out)`, each
/// sorted ascending.
pub fn split_items(items: &[usize], holdout: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order = items.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (items.len() as f64 * holdout).round() as usize;
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// One sample per annotated item: features are the true label, the target
/// is the fused encoding of the item's annotations.
pub fn encode_samples(dataset: &Dataset, epsilon: f64) -> Result<Vec<(usize, Sample)>> {
    let k = dataset.k();
    group_by_item(&dataset.records)
        .into_iter()
        .map(|(item, recs)| {
            let i = item as usize;
            Ok((
                i,
                Sample {
                    features: dataset.manifest.true_labels[i].clone(),
                    target: build_sle(&recs, k, epsilon)?.opinion,
                },
            ))
        })
        .collect()
}

/// Scores a model on the given items against their true labels.
pub fn evaluate_items(params: &ModelParams, dataset: &Dataset, items: &[usize], name: &str, split: &str) -> Result<MetricReport> {
    if items.is_empty() {
        return Err(SleError::Empty("no items to evaluate"));
    }
    if params.k != dataset.k() {
        return Err(SleError::DimensionMismatch {
            expected: dataset.k(),
            got: params.k,
        });
    }
    let mut labels = Vec::with_capacity(items.len());
    let mut dists = Vec::with_capacity(items.len());
    let mut truths = Vec::with_capacity(items.len());
    for &i in items {
        let truth = &dataset.manifest.true_labels[i];
        let op = forward(truth, params)?;
        labels.push(predict_label(&op));
        dists.push(op.project_probability());
        truths.push(truth.clone());
    }
    MetricReport::score(name, split, &labels, &dists, &truths)
}

/// Every item of the dataset.
pub fn evaluate_dataset(params: &ModelParams, dataset: &Dataset, name: &str) -> Result<MetricReport> {
    let items: Vec<usize> = (0..dataset.manifest.n_items).collect();
    evaluate_items(params, dataset, &items, name, "all")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub params: ModelParams,
    pub loss_trace: Vec<f64>,
    pub train_items: Vec<usize>,
    pub held_out_items: Vec<usize>,
    /// On the held-out items, or on the training items when none are held out.
    pub report: MetricReport,
}

/// Encodes targets, splits items, trains, and scores the held-out split.
pub fn train_on_dataset(dataset: &Dataset, config: &TrainConfig) -> Result<TrainingRun> {
    config.validate()?;
    let samples = encode_samples(dataset, config.epsilon_smooth)?;
    if samples.is_empty() {
        return Err(SleError::Empty("dataset has no annotated items"));
    }
    let items: Vec<usize> = samples.iter().map(|(i, _)| *i).collect();
    let (train_items, held_out) = split_items(&items, config.holdout_fraction, derive_seed(config.seed, 2));
    let train_samples: Vec<Sample> = samples
        .iter()
        .filter(|(i, _)| train_items.binary_search(i).is_ok())
        .map(|(_, s)| s.clone())
        .collect();
    let initial = config.initial_params(dataset.k(), dataset.k());
    let outcome = train(&train_samples, config, initial)?;
    let report = if held_out.is_empty() {
        evaluate_items(&outcome.params, dataset, &train_items, config.loss.name(), "train")?
    } else {
        evaluate_items(&outcome.params, dataset, &held_out, config.loss.name(), "held_out")?
    };
    Ok(TrainingRun {
        params: outcome.params,
        loss_trace: outcome.loss_trace,
        train_items,
        held_out_items: held_out,
        report,
    })
}
