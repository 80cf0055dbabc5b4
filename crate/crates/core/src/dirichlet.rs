use serde::{Deserialize, Serialize};

use crate::error::{Result, SleError};
use crate::special::{digamma_unchecked, lgamma_unchecked};

/// Concentration parameters of a Dirichlet distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(SleError::Domain(format!(
                "a Dirichlet needs at least 2 components, got {}",
                alpha.len()
            )));
        }
        if let Some((i, a)) = alpha.iter().enumerate().find(|(_, a)| !(a.is_finite() && **a > 0.0)) {
            return Err(SleError::Domain(format!("alpha[{i}] = {a} must be finite and > 0")));
        }
        Ok(DirichletParams { alpha })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn total(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        let total = self.total();
        self.alpha.iter().map(|a| a / total).collect()
    }

    /// Mode `(alpha_k - 1) / (alpha_0 - K)` when every `alpha_k > 1`.
    ///
    /// The density has no interior maximum otherwise, and the mean is
    /// returned instead so that label extraction always succeeds.
    pub fn mode(&self) -> Vec<f64> {
        if self.alpha.iter().all(|&a| a > 1.0) {
            let denom = self.total() - self.k() as f64;
            self.alpha.iter().map(|a| (a - 1.0) / denom).collect()
        } else {
            self.mean()
        }
    }

    /// `KL(Dir(self) || Dir(other))` in nats.
    pub fn kl(&self, other: &DirichletParams) -> Result<f64> {
        if self.k() != other.k() {
            return Err(SleError::DimensionMismatch {
                expected: self.k(),
                got: other.k(),
            });
        }
        let p0 = self.total();
        let q0 = other.total();
        let dg_p0 = digamma_unchecked(p0);
        let mut kl = lgamma_unchecked(p0) - lgamma_unchecked(q0);
        for (&p, &q) in self.alpha.iter().zip(&other.alpha) {
            kl += lgamma_unchecked(q) - lgamma_unchecked(p) + (p - q) * (digamma_unchecked(p) - dg_p0);
        }
        // Cancellation can leave a tiny negative residue for near-identical arguments.
        Ok(kl.max(0.0))
    }
}

/// Closed-form KL divergence between two Dirichlet distributions.
pub fn dirichlet_kl(p: &DirichletParams, q: &DirichletParams) -> Result<f64> {
    p.kl(q)
}
