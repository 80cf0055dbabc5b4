//! Baseline aggregation (majority and soft voting) and reliability filtering.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{AnnotationRecord, ItemId};
use crate::error::{Result, SleError};

pub const DEFAULT_FILTER_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MethodVariant {
    MajorityVote,
    SoftVote,
    SleFusion,
}

impl MethodVariant {
    pub const ALL: [MethodVariant; 3] = [MethodVariant::MajorityVote, MethodVariant::SoftVote, MethodVariant::SleFusion];

    pub fn name(self) -> &'static str {
        match self {
            MethodVariant::MajorityVote => "mv",
            MethodVariant::SoftVote => "soft",
            MethodVariant::SleFusion => "sle",
        }
    }
}

impl fmt::Display for MethodVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<MethodVariant> for String {
    fn from(m: MethodVariant) -> String {
        m.name().to_string()
    }
}

impl TryFrom<String> for MethodVariant {
    type Error = SleError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for MethodVariant {
    type Err = SleError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mv" | "majority" | "majority_vote" => Ok(MethodVariant::MajorityVote),
            "soft" | "soft_vote" => Ok(MethodVariant::SoftVote),
            "sle" | "fused" | "sle_fusion" => Ok(MethodVariant::SleFusion),
            other => Err(SleError::Config(format!("unknown aggregation method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationMethod {
    pub variant: MethodVariant,
    pub filter_threshold: Option<f64>,
}

impl AggregationMethod {
    pub fn new(variant: MethodVariant, filter_threshold: Option<f64>) -> Result<Self> {
        if let Some(t) = filter_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(SleError::Config(format!("filter threshold must lie in [0, 1], got {t}")));
            }
        }
        Ok(AggregationMethod {
            variant,
            filter_threshold,
        })
    }
}

fn check_nonempty(records: &[AnnotationRecord]) -> Result<()> {
    if records.is_empty() {
        Err(SleError::Empty("no annotations to aggregate"))
    } else {
        Ok(())
    }
}

/// One-hot vector of the most frequent (argmax-hardened) label. Ties are
/// broken uniformly at random using `rng`.
pub fn majority_vote<R: Rng + ?Sized>(records: &[AnnotationRecord], k: usize, rng: &mut R) -> Result<Vec<f64>> {
    check_nonempty(records)?;
    let mut counts = vec![0usize; k];
    for r in records {
        counts[r.label.hard_class(k)?] += 1;
    }
    let best = *counts.iter().max().expect("k >= 1");
    let tied: Vec<usize> = (0..k).filter(|&c| counts[c] == best).collect();
    let winner = if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.random_range(0..tied.len())]
    };
    let mut out = vec![0.0; k];
    out[winner] = 1.0;
    Ok(out)
}

/// Mean of the label vectors.
pub fn soft_vote(records: &[AnnotationRecord], k: usize) -> Result<Vec<f64>> {
    check_nonempty(records)?;
    let mut acc = vec![0.0; k];
    for r in records {
        for (a, y) in acc.iter_mut().zip(r.label.to_vector(k)?) {
            *a += y;
        }
    }
    let n = records.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Keeps records whose reliability is at least `threshold` (missing
/// reliability counts as 1). An item left with no records keeps its single
/// most reliable one, the lowest annotator id winning ties.
pub fn filter_by_reliability(records: &[AnnotationRecord], threshold: f64) -> Vec<AnnotationRecord> {
    let mut kept = Vec::with_capacity(records.len());
    let mut items: Vec<ItemId> = records.iter().map(|r| r.item_id).collect();
    items.sort_unstable();
    items.dedup();
    for item in items {
        let group: Vec<&AnnotationRecord> = records.iter().filter(|r| r.item_id == item).collect();
        let passing: Vec<&AnnotationRecord> = group
            .iter()
            .copied()
            .filter(|r| r.reliability_or_default() >= threshold)
            .collect();
        if passing.is_empty() {
            let best = group
                .iter()
                .copied()
                .reduce(|best, r| {
                    let (rb, rr) = (best.reliability_or_default(), r.reliability_or_default());
                    if rr > rb || (rr == rb && r.annotator_id < best.annotator_id) {
                        r
                    } else {
                        best
                    }
                })
                .expect("group is non-empty");
            kept.push(best.clone());
        } else {
            kept.extend(passing.into_iter().cloned());
        }
    }
    kept
}
