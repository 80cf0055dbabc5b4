//! Hard and soft evaluation metrics against true label distributions.

use serde::{Deserialize, Serialize};

use crate::encoding::{argmax, check_distribution};
use crate::error::{Result, SleError};
use crate::opinion::Opinion;

/// Name of the entropy-similarity formula used by [`nes`], recorded in reports.
pub const NES_VARIANT: &str = "one_minus_abs_entropy_gap";

/// Class predicted by an opinion: argmax of the mode of its Dirichlet, or of
/// the belief vector when the opinion is dogmatic. Lowest index wins ties.
pub fn predict_label(op: &Opinion) -> usize {
    if op.is_dogmatic() {
        return argmax(op.belief());
    }
    match op.to_dirichlet() {
        Ok(alpha) => argmax(&alpha.mode()),
        Err(_) => argmax(op.belief()),
    }
}

/// Hard class for a (possibly soft) true label.
///
/// When the true distribution has several maximal classes, a prediction of
/// any of them is scored as correct; otherwise the lowest maximal index is
/// the truth.
pub fn truth_class(truth: &[f64], prediction: usize) -> usize {
    let max = truth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if truth.get(prediction) == Some(&max) {
        prediction
    } else {
        argmax(truth)
    }
}

/// Micro-averaged F1 over single-label predictions.
pub fn micro_f1(predictions: &[usize], truths: &[usize]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(SleError::DimensionMismatch {
            expected: truths.len(),
            got: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(SleError::Empty("no predictions to score"));
    }
    // Each wrong prediction is one false positive (predicted class) and one
    // false negative (true class), so micro precision = micro recall.
    let tp = predictions.iter().zip(truths).filter(|(p, t)| p == t).count() as f64;
    let fp = predictions.len() as f64 - tp;
    let fn_ = fp;
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fn_);
    if precision + recall == 0.0 {
        Ok(0.0)
    } else {
        Ok(2.0 * precision * recall / (precision + recall))
    }
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    check_distribution(p, p.len()).map_err(|e| SleError::Domain(e.to_string()))?;
    check_distribution(q, p.len()).map_err(|e| SleError::Domain(e.to_string()))
}

/// Shannon entropy in bits.
pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.log2()).sum::<f64>()
}

fn kl_bits(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(pi, mi)| pi * (pi / mi).log2())
        .sum()
}

/// Jensen-Shannon divergence with base-2 logs, in `[0, 1]`.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let d = 0.5 * kl_bits(p, &m) + 0.5 * kl_bits(q, &m);
    Ok(d.clamp(0.0, 1.0))
}

/// Normalized entropy similarity `1 - |H(p) - H(q)| / log2 K`.
pub fn nes(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let norm = (p.len() as f64).log2();
    let gap = (entropy_bits(p) - entropy_bits(q)).abs() / norm;
    Ok((1.0 - gap).clamp(0.0, 1.0))
}

/// Averages of the three metrics for one aggregation method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub f1: f64,
    pub jsd: f64,
    pub nes: f64,
    pub n_items: usize,
    pub sweep_point: String,
    pub nes_variant: String,
}

impl MetricReport {
    /// Scores predicted labels and distributions against true distributions,
    /// averaging in item order.
    pub fn score(
        method: impl Into<String>,
        sweep_point: impl Into<String>,
        predicted_labels: &[usize],
        predicted: &[Vec<f64>],
        truths: &[Vec<f64>],
    ) -> Result<MetricReport> {
        if predicted.len() != truths.len() {
            return Err(SleError::DimensionMismatch {
                expected: truths.len(),
                got: predicted.len(),
            });
        }
        let hard_truths: Vec<usize> = truths
            .iter()
            .zip(predicted_labels)
            .map(|(t, &p)| truth_class(t, p))
            .collect();
        let f1 = micro_f1(predicted_labels, &hard_truths)?;
        let n = truths.len() as f64;
        let mut jsd_sum = 0.0;
        let mut nes_sum = 0.0;
        for (p, t) in predicted.iter().zip(truths) {
            jsd_sum += jsd(p, t)?;
            nes_sum += nes(p, t)?;
        }
        Ok(MetricReport {
            method: method.into(),
            f1,
            jsd: jsd_sum / n,
            nes: nes_sum / n,
            n_items: truths.len(),
            sweep_point: sweep_point.into(),
            nes_variant: NES_VARIANT.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn label_prediction() {
        assert_eq!(predict_label(&Opinion::dogmatic(vec![1.0, 0.0]).unwrap()), 0);
        let from_alpha = Opinion::with_uniform_base(vec![0.5, 0.25], 0.25).unwrap();
        assert_eq!(predict_label(&from_alpha), 0);
        assert_eq!(predict_label(&Opinion::vacuous(4).unwrap()), 0);
    }

    #[test]
    fn tied_truths() {
        let t = [0.5, 0.5, 0.0];
        assert_eq!(truth_class(&t, 1), 1);
        assert_eq!(truth_class(&t, 2), 0);
        assert_eq!(truth_class(&[0.2, 0.8], 0), 1);
    }

    #[test]
    fn f1_examples() {
        assert_eq!(micro_f1(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(micro_f1(&[1, 2, 0], &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(micro_f1(&[0, 1, 2, 2], &[0, 1, 2, 0]).unwrap(), 0.75);
        assert!(micro_f1(&[0], &[0, 1]).is_err());
        assert!(micro_f1(&[], &[]).is_err());
    }

    #[test]
    fn jsd_examples() {
        assert_eq!(jsd(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_abs_diff_eq!(jsd(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0, epsilon = 1e-15);
        // M = (0.75, 0.25): 0.5 log2(4/3) + 0.5 (0.5 log2(2/3) + 0.5 log2 2)
        let want = 0.5 * (4.0f64 / 3.0).log2() + 0.25 * (2.0f64 / 3.0).log2() + 0.25;
        assert_abs_diff_eq!(jsd(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), want, epsilon = 1e-15);
        assert_abs_diff_eq!(want, 0.3113, epsilon = 1e-4);
        assert!(jsd(&[0.5, 0.6], &[0.5, 0.5]).is_err());
        assert!(jsd(&[0.5, 0.5], &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn nes_examples() {
        assert_eq!(nes(&[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5]).unwrap(), 1.0);
        assert_abs_diff_eq!(nes(&[0.25; 4], &[0.0, 1.0, 0.0, 0.0]).unwrap(), 0.0, epsilon = 1e-15);
        let h = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert_abs_diff_eq!(nes(&[0.5, 0.5], &[0.75, 0.25]).unwrap(), h, epsilon = 1e-15);
        assert_abs_diff_eq!(h, 0.8113, epsilon = 1e-4);
    }

    #[test]
    fn predictions_stable_under_smoothing() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut checked = 0;
        while checked < 500 {
            let k = rng.random_range(2..6);
            let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            let b: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let mut sorted = b.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if sorted[0] - sorted[1] < 1e-6 {
                continue;
            }
            let dogmatic = Opinion::dogmatic(b).unwrap();
            let labels: Vec<usize> = [1e-2, 1e-3, 1e-4]
                .iter()
                .map(|&e| predict_label(&dogmatic.smooth(e).unwrap()))
                .collect();
            assert!(labels.iter().all(|&l| l == predict_label(&dogmatic)));
            checked += 1;
        }
    }

    fn dist(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, k).prop_filter_map("non-degenerate", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn jsd_is_symmetric_and_bounded((p, q) in (2usize..7).prop_flat_map(|k| (dist(k), dist(k)))) {
            let a = jsd(&p, &q).unwrap();
            prop_assert_eq!(a, jsd(&q, &p).unwrap());
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(jsd(&p, &p).unwrap() < 1e-15);
        }

        #[test]
        fn nes_is_symmetric_and_bounded((p, q) in (2usize..7).prop_flat_map(|k| (dist(k), dist(k)))) {
            let a = nes(&p, &q).unwrap();
            prop_assert_eq!(a, nes(&q, &p).unwrap());
            prop_assert!((0.0..=1.0).contains(&a));
            let mut r = q.clone();
            r.reverse();
            prop_assert!((nes(&p, &r).unwrap() - a).abs() < 1e-12);
        }
    }
}
