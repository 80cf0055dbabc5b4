//! Multinomial subjective-logic opinions and the operators on them.

use serde::{Deserialize, Serialize};

use crate::dirichlet::DirichletParams;
use crate::error::{Result, SleError};

/// Tolerance for the additivity and base-rate sum constraints.
pub const ADDITIVITY_TOL: f64 = 1e-9;

/// Uncertainty at or below this is treated as dogmatic.
pub const DOGMATIC_TOL: f64 = 1e-12;

/// Default belief mass moved into uncertainty by [`Opinion::smooth`].
pub const DEFAULT_EPSILON: f64 = 1e-3;

/// Prior weight of the opinion/Dirichlet mapping.
const PRIOR_WEIGHT: f64 = 2.0;

const RANGE_TOL: f64 = 1e-12;

/// An opinion `(b, u, a)` over `K >= 2` mutually exclusive classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Opinion {
    belief: Vec<f64>,
    uncertainty: f64,
    base_rate: Vec<f64>,
}

impl Opinion {
    pub fn new(belief: Vec<f64>, uncertainty: f64, base_rate: Vec<f64>) -> Result<Self> {
        let k = belief.len();
        if k < 2 {
            return Err(SleError::Domain(format!("opinions need K >= 2 classes, got {k}")));
        }
        if base_rate.len() != k {
            return Err(SleError::DimensionMismatch {
                expected: k,
                got: base_rate.len(),
            });
        }
        if belief.iter().chain(&base_rate).any(|v| !v.is_finite()) || !uncertainty.is_finite() {
            return Err(SleError::Constraint {
                what: "all components must be finite",
                residual: f64::NAN,
            });
        }
        if let Some(&b) = belief.iter().find(|&&b| !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&b)) {
            return Err(SleError::Constraint {
                what: "belief components must lie in [0, 1]",
                residual: if b < 0.0 { b } else { b - 1.0 },
            });
        }
        if !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&uncertainty) {
            return Err(SleError::Constraint {
                what: "uncertainty must lie in [0, 1]",
                residual: if uncertainty < 0.0 { uncertainty } else { uncertainty - 1.0 },
            });
        }
        if let Some(&a) = base_rate.iter().find(|&&a| !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&a)) {
            return Err(SleError::Constraint {
                what: "base-rate components must lie in [0, 1]",
                residual: if a < 0.0 { a } else { a - 1.0 },
            });
        }
        let residual = uncertainty + belief.iter().sum::<f64>() - 1.0;
        if residual.abs() > ADDITIVITY_TOL {
            return Err(SleError::Constraint {
                what: "u + sum(b) = 1",
                residual,
            });
        }
        let residual = base_rate.iter().sum::<f64>() - 1.0;
        if residual.abs() > ADDITIVITY_TOL {
            return Err(SleError::Constraint {
                what: "sum(a) = 1",
                residual,
            });
        }
        Ok(Opinion {
            belief,
            uncertainty,
            base_rate,
        })
    }

    /// Opinion with the uniform base rate `1/K`.
    pub fn with_uniform_base(belief: Vec<f64>, uncertainty: f64) -> Result<Self> {
        let k = belief.len();
        Self::new(belief, uncertainty, uniform(k))
    }

    /// Total ignorance: `b = 0`, `u = 1`.
    pub fn vacuous(k: usize) -> Result<Self> {
        Self::with_uniform_base(vec![0.0; k], 1.0)
    }

    /// Dogmatic opinion equal to a categorical distribution.
    pub fn dogmatic(probabilities: Vec<f64>) -> Result<Self> {
        Self::with_uniform_base(probabilities, 0.0)
    }

    pub fn belief(&self) -> &[f64] {
        &self.belief
    }

    pub fn uncertainty(&self) -> f64 {
        self.uncertainty
    }

    pub fn base_rate(&self) -> &[f64] {
        &self.base_rate
    }

    pub fn k(&self) -> usize {
        self.belief.len()
    }

    pub fn belief_mass(&self) -> f64 {
        self.belief.iter().sum()
    }

    pub fn is_dogmatic(&self) -> bool {
        self.uncertainty <= DOGMATIC_TOL
    }

    pub fn is_vacuous(&self) -> bool {
        self.uncertainty == 1.0 && self.belief.iter().all(|&b| b == 0.0)
    }

    /// Projected probability `P = b + u a`.
    pub fn project_probability(&self) -> Vec<f64> {
        self.belief
            .iter()
            .zip(&self.base_rate)
            .map(|(b, a)| b + self.uncertainty * a)
            .collect()
    }

    /// Dirichlet parameters `alpha = 2 b / u + K a`.
    pub fn to_dirichlet(&self) -> Result<DirichletParams> {
        if self.is_dogmatic() {
            return Err(SleError::Dogmatic {
                uncertainty: self.uncertainty,
            });
        }
        let k = self.k() as f64;
        let alpha = self
            .belief
            .iter()
            .zip(&self.base_rate)
            .map(|(b, a)| PRIOR_WEIGHT * b / self.uncertainty + k * a)
            .collect();
        DirichletParams::new(alpha)
    }

    /// Inverse of [`Opinion::to_dirichlet`] for a given base rate.
    pub fn from_dirichlet(params: &DirichletParams, base_rate: Vec<f64>) -> Result<Self> {
        let alpha = params.alpha();
        let k = alpha.len();
        if base_rate.len() != k {
            return Err(SleError::DimensionMismatch {
                expected: k,
                got: base_rate.len(),
            });
        }
        let kf = k as f64;
        let total: f64 = alpha.iter().sum();
        let uncertainty = PRIOR_WEIGHT / (total - kf + PRIOR_WEIGHT);
        let mut belief = Vec::with_capacity(k);
        for (i, (&al, &a)) in alpha.iter().zip(&base_rate).enumerate() {
            let evidence = al - kf * a;
            if evidence < -RANGE_TOL {
                return Err(SleError::Domain(format!(
                    "alpha[{i}] = {al} is below K*a = {}; implied belief is negative",
                    kf * a
                )));
            }
            belief.push(uncertainty * evidence.max(0.0) / PRIOR_WEIGHT);
        }
        Self::new(belief, uncertainty, base_rate)
    }

    /// Cumulative belief fusion `self ⊕ other`.
    pub fn cumulative_fuse(&self, other: &Opinion) -> Result<Opinion> {
        if self.k() != other.k() {
            return Err(SleError::DimensionMismatch {
                expected: self.k(),
                got: other.k(),
            });
        }
        if other.is_vacuous() {
            return Ok(self.clone());
        }
        if self.is_vacuous() {
            return Ok(other.clone());
        }
        let (um, uq) = (self.uncertainty, other.uncertainty);
        let denom = um + uq - um * uq;
        if denom <= 0.0 || (self.is_dogmatic() && other.is_dogmatic()) {
            return Err(SleError::DegenerateFusion);
        }
        let belief = self
            .belief
            .iter()
            .zip(&other.belief)
            .map(|(bm, bq)| (bm * uq + bq * um) / denom)
            .collect();
        let uncertainty = um * uq / denom;
        let base_denom = um + uq - 2.0 * um * uq;
        let base_rate = if base_denom.abs() <= DOGMATIC_TOL {
            // Both operands fully uncertain: the fused base rate is undefined, keep ours.
            self.base_rate.clone()
        } else {
            self.base_rate
                .iter()
                .zip(&other.base_rate)
                .map(|(am, aq)| (am * uq + aq * um - (am + aq) * um * uq) / base_denom)
                .collect()
        };
        Opinion::new(belief, uncertainty, base_rate)
    }

    /// Trust discounting by the projected trust probability `trust`.
    pub fn trust_discount(&self, trust: ReliabilityScore) -> Result<Opinion> {
        let t = trust.value();
        let belief: Vec<f64> = self.belief.iter().map(|b| t * b).collect();
        let uncertainty = 1.0 - t * self.belief_mass();
        Opinion::new(belief, uncertainty, self.base_rate.clone())
    }

    /// Moves `epsilon` of belief mass into uncertainty, removing it from the
    /// nonzero belief components in proportion to their size.
    pub fn smooth(&self, epsilon: f64) -> Result<Opinion> {
        let mass = self.belief_mass();
        if !(epsilon > 0.0 && epsilon <= mass) {
            return Err(SleError::Domain(format!(
                "smoothing epsilon must lie in (0, {mass}], got {epsilon}"
            )));
        }
        let scale = 1.0 - epsilon / mass;
        let belief = self.belief.iter().map(|b| b * scale).collect();
        Opinion::new(belief, self.uncertainty + epsilon, self.base_rate.clone())
    }

    /// Smooths only when the opinion is dogmatic.
    pub fn smooth_if_dogmatic(&self, epsilon: f64) -> Result<Opinion> {
        if self.is_dogmatic() {
            self.smooth(epsilon)
        } else {
            Ok(self.clone())
        }
    }
}

/// Left fold of [`Opinion::cumulative_fuse`] over `opinions`.
pub fn fuse_many<'a, I>(opinions: I) -> Result<Opinion>
where
    I: IntoIterator<Item = &'a Opinion>,
{
    let mut iter = opinions.into_iter();
    let first = iter.next().ok_or(SleError::Empty("no opinions to fuse"))?;
    iter.try_fold(first.clone(), |acc, op| acc.cumulative_fuse(op))
}

/// Annotator reliability in `[0, 1]`, used as the projected trust probability.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ReliabilityScore(f64);

impl ReliabilityScore {
    pub const FULL: ReliabilityScore = ReliabilityScore(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(ReliabilityScore(value))
        } else {
            Err(SleError::Domain(format!("reliability must lie in [0, 1], got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn uniform(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn op(b: &[f64], u: f64) -> Opinion {
        Opinion::with_uniform_base(b.to_vec(), u).unwrap()
    }

    #[test]
    fn construction() {
        assert!(Opinion::with_uniform_base(vec![0.8, 0.1], 0.1).is_ok());
        match Opinion::with_uniform_base(vec![0.8, 0.3], 0.1) {
            Err(SleError::Constraint { residual, .. }) => assert_abs_diff_eq!(residual, 0.2, epsilon = 1e-12),
            other => panic!("expected constraint error, got {other:?}"),
        }
        let v = Opinion::with_uniform_base(vec![0.0, 0.0], 1.0).unwrap();
        assert!(v.is_vacuous());
        assert!(Opinion::with_uniform_base(vec![1.0], 0.0).is_err());
        assert!(Opinion::new(vec![0.5, 0.5], 0.0, vec![0.7, 0.7]).is_err());
    }

    #[test]
    fn dirichlet_mapping() {
        assert_eq!(op(&[0.5, 0.25], 0.25).to_dirichlet().unwrap().alpha(), &[5.0, 3.0]);
        assert_eq!(op(&[0.0, 0.0], 1.0).to_dirichlet().unwrap().alpha(), &[1.0, 1.0]);
        let a = op(&[0.9, 0.05], 0.05).to_dirichlet().unwrap();
        assert_abs_diff_eq!(a.alpha()[0], 37.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.alpha()[1], 3.0, epsilon = 1e-12);
        assert!(matches!(op(&[1.0, 0.0], 0.0).to_dirichlet(), Err(SleError::Dogmatic { .. })));
    }

    #[test]
    fn dirichlet_inverse() {
        let back = Opinion::from_dirichlet(&DirichletParams::new(vec![5.0, 3.0]).unwrap(), uniform(2)).unwrap();
        assert_abs_diff_eq!(back.belief()[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(back.belief()[1], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(back.uncertainty(), 0.25, epsilon = 1e-12);
        let flat = Opinion::from_dirichlet(&DirichletParams::new(vec![1.0, 1.0]).unwrap(), uniform(2)).unwrap();
        assert_eq!(flat.uncertainty(), 1.0);
        assert!(Opinion::from_dirichlet(&DirichletParams::new(vec![0.5, 1.0]).unwrap(), uniform(2)).is_err());
    }

    #[test]
    fn projection() {
        assert_eq!(op(&[0.5, 0.25], 0.25).project_probability(), vec![0.625, 0.375]);
        assert_eq!(op(&[1.0, 0.0], 0.0).project_probability(), vec![1.0, 0.0]);
        assert_eq!(op(&[0.0, 0.0], 1.0).project_probability(), vec![0.5, 0.5]);
    }

    #[test]
    fn fusion_example() {
        let fused = op(&[0.6, 0.2], 0.2).cumulative_fuse(&op(&[0.2, 0.6], 0.2)).unwrap();
        assert_abs_diff_eq!(fused.belief()[0], 4.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fused.belief()[1], 4.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fused.uncertainty(), 1.0 / 9.0, epsilon = 1e-12);
        let vac = Opinion::vacuous(2).unwrap();
        let w = op(&[0.3, 0.5], 0.2);
        assert_eq!(w.cumulative_fuse(&vac).unwrap(), w);
        assert_eq!(vac.cumulative_fuse(&w).unwrap(), w);
        assert!(matches!(
            op(&[1.0, 0.0], 0.0).cumulative_fuse(&op(&[0.0, 1.0], 0.0)),
            Err(SleError::DegenerateFusion)
        ));
    }

    #[test]
    fn fuse_many_folds() {
        let w = op(&[0.3, 0.5], 0.2);
        let vac = Opinion::vacuous(2).unwrap();
        assert_eq!(fuse_many([&w]).unwrap(), w);
        assert_eq!(fuse_many([&w, &vac, &vac]).unwrap(), w);
        assert!(matches!(fuse_many(std::iter::empty()), Err(SleError::Empty(_))));

        let x = op(&[0.45, 0.45], 0.1);
        let mut acc = x.clone();
        let mut prev = x.uncertainty();
        for _ in 1..10 {
            acc = acc.cumulative_fuse(&x).unwrap();
            assert!(acc.uncertainty() < prev);
            prev = acc.uncertainty();
        }
        assert!(prev < 0.1);
    }

    #[test]
    fn discounting() {
        let d = op(&[0.8, 0.1], 0.1).trust_discount(ReliabilityScore::new(0.5).unwrap()).unwrap();
        assert_abs_diff_eq!(d.belief()[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(d.belief()[1], 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(d.uncertainty(), 0.55, epsilon = 1e-12);
        let w = op(&[0.8, 0.1], 0.1);
        assert_eq!(w.trust_discount(ReliabilityScore::FULL).unwrap().belief(), w.belief());
        let z = w.trust_discount(ReliabilityScore::new(0.0).unwrap()).unwrap();
        assert!(z.is_vacuous());
        assert!(ReliabilityScore::new(1.5).is_err());
    }

    #[test]
    fn smoothing() {
        let s = op(&[1.0, 0.0], 0.0).smooth(0.01).unwrap();
        assert_abs_diff_eq!(s.belief()[0], 0.99, epsilon = 1e-12);
        assert_eq!(s.belief()[1], 0.0);
        assert_abs_diff_eq!(s.uncertainty(), 0.01, epsilon = 1e-12);
        assert!(s.to_dirichlet().is_ok());
        assert!(op(&[1.0, 0.0], 0.0).smooth(0.0).is_err());
        assert!(Opinion::vacuous(3).unwrap().smooth(1e-3).is_err());
    }

    #[test]
    fn mean_matches_projection_for_binary() {
        // The 2b/u + K a mapping has prior mass K; for K = 2 its mean is b + u a.
        let w = op(&[0.3, 0.45], 0.25);
        let alpha = w.to_dirichlet().unwrap();
        let p = w.project_probability();
        for (m, p) in alpha.mean().iter().zip(&p) {
            assert_abs_diff_eq!(m, p, epsilon = 1e-12);
        }
    }

    fn arb_opinion(k: usize) -> impl Strategy<Value = Opinion> {
        (prop::collection::vec(0.0f64..1.0, k + 1), 1e-3f64..1.0).prop_map(move |(raw, floor)| {
            let total: f64 = raw.iter().sum::<f64>() + 1e-12;
            let mut parts: Vec<f64> = raw.iter().map(|r| r / total).collect();
            // keep u bounded away from zero
            let u = parts.pop().unwrap() * (1.0 - floor) + floor;
            let scale = (1.0 - u) / parts.iter().sum::<f64>().max(1e-12);
            let b: Vec<f64> = parts.iter().map(|p| p * scale).collect();
            let fix = 1.0 - u - b.iter().sum::<f64>();
            let mut b = b;
            b[0] = (b[0] + fix).max(0.0);
            Opinion::with_uniform_base(b, u).unwrap()
        })
    }

    proptest! {
        #[test]
        fn fusion_commutes_and_shrinks_uncertainty((x, y) in (2usize..6).prop_flat_map(|k| (arb_opinion(k), arb_opinion(k)))) {
            let xy = x.cumulative_fuse(&y).unwrap();
            let yx = y.cumulative_fuse(&x).unwrap();
            for (a, b) in xy.belief().iter().zip(yx.belief()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert!((xy.uncertainty() - yx.uncertainty()).abs() < 1e-9);
            prop_assert!(xy.uncertainty() <= x.uncertainty().min(y.uncertainty()) + 1e-15);
        }

        #[test]
        fn dirichlet_round_trip(x in (2usize..8).prop_flat_map(arb_opinion)) {
            let back = Opinion::from_dirichlet(&x.to_dirichlet().unwrap(), x.base_rate().to_vec()).unwrap();
            for (a, b) in back.belief().iter().zip(x.belief()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert!((back.uncertainty() - x.uncertainty()).abs() < 1e-9);
        }

        #[test]
        fn discount_raises_uncertainty(x in (2usize..6).prop_flat_map(arb_opinion), t in 0.0f64..1.0) {
            let d = x.trust_discount(ReliabilityScore::new(t).unwrap()).unwrap();
            prop_assert!(d.uncertainty() >= x.uncertainty() - 1e-15);
        }
    }
}
