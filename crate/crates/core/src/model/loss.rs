use serde::{Deserialize, Serialize};

use crate::error::{Result, SleError};
use crate::opinion::Opinion;
use crate::special::{digamma_unchecked, trigamma_unchecked};

/// Predicted probabilities are floored here before taking logs.
pub const CE_PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    ForwardKl,
    ReverseKl,
}

impl LossKind {
    pub fn is_kl(self) -> bool {
        !matches!(self, LossKind::CrossEntropy)
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "cross_entropy",
            LossKind::ForwardKl => "forward_kl",
            LossKind::ReverseKl => "reverse_kl",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = SleError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ce" | "cross_entropy" => Ok(LossKind::CrossEntropy),
            "kl" | "forward_kl" => Ok(LossKind::ForwardKl),
            "reverse_kl" | "rkl" => Ok(LossKind::ReverseKl),
            other => Err(SleError::Config(format!("unknown loss `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// Number of predicted probabilities that hit [`CE_PROBABILITY_FLOOR`].
    pub clamped: usize,
}

/// `-Σ t_k ln P_k` with `P` the projected probability of `predicted`.
pub fn loss_cross_entropy(target: &[f64], predicted: &Opinion) -> LossValue {
    let p = predicted.project_probability();
    let mut clamped = 0;
    let mut value = 0.0;
    for (t, pk) in target.iter().zip(&p) {
        if *t == 0.0 {
            continue;
        }
        let pk = if *pk < CE_PROBABILITY_FLOOR {
            clamped += 1;
            CE_PROBABILITY_FLOOR
        } else {
            *pk
        };
        value -= t * pk.ln();
    }
    LossValue { value, clamped }
}

/// `KL(Dir(target) || Dir(predicted))`.
pub fn loss_forward_kl(target: &Opinion, predicted: &Opinion) -> Result<LossValue> {
    let value = target.to_dirichlet()?.kl(&predicted.to_dirichlet()?)?;
    Ok(LossValue { value, clamped: 0 })
}

/// `KL(Dir(predicted) || Dir(target))`.
pub fn loss_reverse_kl(target: &Opinion, predicted: &Opinion) -> Result<LossValue> {
    let value = predicted.to_dirichlet()?.kl(&target.to_dirichlet()?)?;
    Ok(LossValue { value, clamped: 0 })
}

/// Loss and its gradient with respect to the softmax output `s`
/// (`s[..K]` beliefs, `s[K]` uncertainty).
pub(crate) fn loss_and_output_grad(kind: LossKind, target: &Opinion, s: &[f64]) -> Result<(f64, Vec<f64>)> {
    let k = s.len() - 1;
    let u = s[k];
    let predicted = super::opinion_from_softmax(s)?;
    let mut g = vec![0.0; k + 1];
    match kind {
        LossKind::CrossEntropy => {
            let t = target.project_probability();
            let loss = loss_cross_entropy(&t, &predicted).value;
            let p = predicted.project_probability();
            let kf = k as f64;
            for i in 0..k {
                if t[i] == 0.0 || p[i] < CE_PROBABILITY_FLOOR {
                    continue;
                }
                let d = -t[i] / p[i];
                g[i] += d;
                g[k] += d / kf;
            }
            Ok((loss, g))
        }
        LossKind::ForwardKl | LossKind::ReverseKl => {
            if predicted.is_dogmatic() {
                return Err(SleError::NonFinite {
                    what: "predicted concentration",
                    index: crate::encoding::argmax(&s[..k]),
                });
            }
            let target_alpha = target.to_dirichlet()?;
            let pred_alpha = predicted.to_dirichlet()?;
            let (p, q) = (target_alpha.alpha(), pred_alpha.alpha());
            let (p0, q0) = (target_alpha.total(), pred_alpha.total());
            // dL/dq for the predicted concentration parameters
            let dq: Vec<f64> = if kind == LossKind::ForwardKl {
                let shift = digamma_unchecked(p0) - digamma_unchecked(q0);
                (0..k)
                    .map(|i| digamma_unchecked(q[i]) - digamma_unchecked(p[i]) + shift)
                    .collect()
            } else {
                let excess: f64 = q.iter().zip(p).map(|(a, b)| a - b).sum();
                let tg0 = trigamma_unchecked(q0);
                (0..k)
                    .map(|i| (q[i] - p[i]) * trigamma_unchecked(q[i]) - tg0 * excess)
                    .collect()
            };
            let loss = if kind == LossKind::ForwardKl {
                target_alpha.kl(&pred_alpha)?
            } else {
                pred_alpha.kl(&target_alpha)?
            };
            // q_i = 2 b_i / u + K a_i
            for i in 0..k {
                g[i] = dq[i] * 2.0 / u;
                g[k] -= dq[i] * 2.0 * s[i] / (u * u);
            }
            Ok((loss, g))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::entropy_bits;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_opinion(rng: &mut ChaCha8Rng, k: usize, min_u: f64) -> Opinion {
        let raw: Vec<f64> = (0..=k).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let mut u = raw[k] / total;
        u = min_u + (1.0 - min_u) * u;
        let bsum: f64 = raw[..k].iter().sum();
        let b = raw[..k].iter().map(|v| v / bsum * (1.0 - u)).collect();
        Opinion::with_uniform_base(b, u).unwrap()
    }

    #[test]
    fn cross_entropy_examples() {
        let perfect = Opinion::dogmatic(vec![1.0, 0.0]).unwrap();
        assert_eq!(loss_cross_entropy(&[1.0, 0.0], &perfect).value, 0.0);
        let half = Opinion::dogmatic(vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(loss_cross_entropy(&[0.5, 0.5], &half).value, 2f64.ln(), epsilon = 1e-15);
        let wrong = Opinion::dogmatic(vec![0.0, 1.0]).unwrap();
        let l = loss_cross_entropy(&[1.0, 0.0], &wrong);
        assert_eq!(l.clamped, 1);
        assert!(l.value.is_finite());
    }

    #[test]
    fn cross_entropy_is_kl_plus_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let k = rng.random_range(2..7);
            let target = random_opinion(&mut rng, k, 0.0).project_probability();
            let pred = random_opinion(&mut rng, k, 0.0);
            let q = pred.project_probability();
            let ce = loss_cross_entropy(&target, &pred).value;
            let kl: f64 = target.iter().zip(&q).map(|(t, q)| t * (t / q).ln()).sum();
            let h = entropy_bits(&target) * std::f64::consts::LN_2;
            assert_abs_diff_eq!(ce, kl + h, epsilon = 1e-9);
            assert!(ce - h >= -1e-12);
        }
        // one-hot targets have zero entropy, so CE equals KL
        let pred = random_opinion(&mut rng, 3, 0.0);
        let q = pred.project_probability();
        assert_abs_diff_eq!(loss_cross_entropy(&[0.0, 1.0, 0.0], &pred).value, -(q[1].ln()), epsilon = 1e-15);
    }

    #[test]
    fn kl_losses() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let k = rng.random_range(2..6);
            let t = random_opinion(&mut rng, k, 0.01);
            let p = random_opinion(&mut rng, k, 0.01);
            assert_eq!(loss_forward_kl(&t, &t).unwrap().value, 0.0);
            assert_eq!(loss_reverse_kl(&t, &t).unwrap().value, 0.0);
            assert!(loss_forward_kl(&t, &p).unwrap().value >= 0.0);
            assert!(loss_reverse_kl(&t, &p).unwrap().value >= 0.0);
        }
        let dogmatic = Opinion::dogmatic(vec![1.0, 0.0]).unwrap();
        let soft = Opinion::with_uniform_base(vec![0.5, 0.25], 0.25).unwrap();
        assert!(loss_forward_kl(&dogmatic, &soft).is_err());
        assert!(loss_reverse_kl(&soft, &dogmatic).is_err());
    }

    #[test]
    fn forward_and_reverse_differ() {
        // alpha (5,3) vs (3,5) in K = 2: b = (0.5, 0.25), u = 0.25 and its mirror.
        let p = Opinion::with_uniform_base(vec![0.5, 0.25], 0.25).unwrap();
        let q = Opinion::with_uniform_base(vec![0.25, 0.5], 0.25).unwrap();
        let fwd = loss_forward_kl(&p, &q).unwrap().value;
        let rev = loss_reverse_kl(&p, &q).unwrap().value;
        // Mirrored pairs are symmetric, so use an asymmetric pair for the contrast.
        assert_abs_diff_eq!(fwd, rev, epsilon = 1e-12);
        let r = Opinion::with_uniform_base(vec![0.1, 0.1], 0.8).unwrap();
        let fwd = loss_forward_kl(&p, &r).unwrap().value;
        let rev = loss_reverse_kl(&p, &r).unwrap().value;
        assert!((fwd - rev).abs() > 1e-3, "{fwd} vs {rev}");
    }
}
