//! Encoding annotations as opinions and fusing them into per-item targets.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SleError};
use crate::opinion::{fuse_many, Opinion, ReliabilityScore, ADDITIVITY_TOL};

pub type ItemId = u64;
pub type AnnotatorId = u64;

/// A class index or a probability vector over the classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Class(usize),
    Distribution(Vec<f64>),
}

impl Label {
    /// The one-hot or probabilistic vector for `k` classes.
    pub fn to_vector(&self, k: usize) -> Result<Vec<f64>> {
        match self {
            Label::Class(c) if *c < k => {
                let mut v = vec![0.0; k];
                v[*c] = 1.0;
                Ok(v)
            }
            Label::Class(c) => Err(SleError::InvalidLabel(format!("class {c} is out of range for K = {k}"))),
            Label::Distribution(p) => {
                check_distribution(p, k)?;
                Ok(p.clone())
            }
        }
    }

    /// Argmax class, lowest index on ties.
    pub fn hard_class(&self, k: usize) -> Result<usize> {
        Ok(argmax(&self.to_vector(k)?))
    }
}

pub(crate) fn check_distribution(p: &[f64], k: usize) -> Result<()> {
    if p.len() != k {
        return Err(SleError::InvalidLabel(format!(
            "probability label has {} entries, expected {k}",
            p.len()
        )));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(SleError::InvalidLabel("probability label has negative or non-finite entries".into()));
    }
    let residual = p.iter().sum::<f64>() - 1.0;
    if residual.abs() > ADDITIVITY_TOL {
        return Err(SleError::InvalidLabel(format!("probability label sums to 1{residual:+e}")));
    }
    Ok(())
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// One annotator's judgment on one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    #[serde(rename = "item")]
    pub item_id: ItemId,
    #[serde(rename = "annotator")]
    pub annotator_id: AnnotatorId,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reliability: Option<f64>,
}

impl AnnotationRecord {
    pub fn validate(&self, k: usize) -> Result<()> {
        self.label.to_vector(k)?;
        for (name, v) in [("confidence", self.confidence), ("reliability", self.reliability)] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(SleError::Domain(format!("{name} must lie in [0, 1], got {v}")));
                }
            }
        }
        Ok(())
    }

    /// Reliability with the missing-metadata default of 1.
    pub fn reliability_or_default(&self) -> f64 {
        self.reliability.unwrap_or(1.0)
    }
}

/// The fused opinion for one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedTarget {
    pub item_id: ItemId,
    pub opinion: Opinion,
    pub contributing_annotators: Vec<AnnotatorId>,
}

/// The default confidence-to-uncertainty map `u = 1 - c`.
pub fn affine_uncertainty(confidence: f64) -> f64 {
    1.0 - confidence
}

/// Encodes a single annotation with `u = 1 - c` (`c` defaults to 1).
pub fn encode_annotation(record: &AnnotationRecord, k: usize) -> Result<Opinion> {
    encode_annotation_with(record, k, affine_uncertainty)
}

/// Encodes a single annotation as `b = y - u y` with a caller-supplied
/// confidence-to-uncertainty map.
pub fn encode_annotation_with<F>(record: &AnnotationRecord, k: usize, uncertainty_of: F) -> Result<Opinion>
where
    F: Fn(f64) -> f64,
{
    record.validate(k)?;
    let y = record.label.to_vector(k)?;
    let u = uncertainty_of(record.confidence.unwrap_or(1.0));
    if !(0.0..=1.0).contains(&u) {
        return Err(SleError::Domain(format!("uncertainty map produced {u}, outside [0, 1]")));
    }
    let belief = y.iter().map(|yk| yk - u * yk).collect();
    Opinion::with_uniform_base(belief, u)
}

/// Builds the fused target for one item: every record is encoded,
/// discounted by its reliability, smoothed by `epsilon` if still dogmatic,
/// and the results are fused in ascending annotator-id order.
pub fn build_sle(records: &[AnnotationRecord], k: usize, epsilon: f64) -> Result<EncodedTarget> {
    build_sle_with(records, k, epsilon, affine_uncertainty)
}

pub fn build_sle_with<F>(records: &[AnnotationRecord], k: usize, epsilon: f64, uncertainty_of: F) -> Result<EncodedTarget>
where
    F: Fn(f64) -> f64,
{
    let first = records.first().ok_or(SleError::Empty("no annotations for item"))?;
    if let Some(other) = records.iter().find(|r| r.item_id != first.item_id) {
        return Err(SleError::Domain(format!(
            "records for items {} and {} passed to one target",
            first.item_id, other.item_id
        )));
    }
    let mut ordered: Vec<&AnnotationRecord> = records.iter().collect();
    ordered.sort_by_key(|r| r.annotator_id);

    let opinions = ordered
        .iter()
        .map(|r| {
            let trust = ReliabilityScore::new(r.reliability_or_default())?;
            encode_annotation_with(r, k, &uncertainty_of)?
                .trust_discount(trust)?
                .smooth_if_dogmatic(epsilon)
        })
        .collect::<Result<Vec<_>>>()?;
    let opinion = fuse_many(&opinions)?;
    Ok(EncodedTarget {
        item_id: first.item_id,
        opinion,
        contributing_annotators: ordered.iter().map(|r| r.annotator_id).collect(),
    })
}

/// Groups records by item (ascending id) and builds one target per item.
pub fn build_targets(records: &[AnnotationRecord], k: usize, epsilon: f64) -> Result<Vec<EncodedTarget>> {
    group_by_item(records)
        .into_iter()
        .map(|(_, recs)| build_sle(&recs, k, epsilon))
        .collect()
}

/// Records bucketed by item id, in ascending item order.
pub fn group_by_item(records: &[AnnotationRecord]) -> Vec<(ItemId, Vec<AnnotationRecord>)> {
    let mut map: std::collections::BTreeMap<ItemId, Vec<AnnotationRecord>> = Default::default();
    for r in records {
        map.entry(r.item_id).or_default().push(r.clone());
    }
    map.into_iter().collect()
}
