//! JSONL annotation files with a JSON manifest alongside.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoding::AnnotationRecord;
use crate::error::{Result, SleError};
use crate::metrics::jsd;
use crate::synth::{AnnotatorProfile, SyntheticConfig, SyntheticDataset};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub k: usize,
    pub m: usize,
    pub n_items: usize,
    /// Indexed by item id.
    pub true_labels: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<SyntheticConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotator_profiles: Vec<AnnotatorProfile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<AnnotationRecord>,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn from_synthetic(data: SyntheticDataset, config: &SyntheticConfig) -> Self {
        Dataset {
            manifest: Manifest {
                format_version: MANIFEST_FORMAT_VERSION,
                k: data.k,
                m: data.annotator_profiles.len(),
                n_items: data.true_labels.len(),
                true_labels: data.true_labels,
                generator: Some(config.clone()),
                annotator_profiles: data.annotator_profiles,
            },
            records: data.annotations,
        }
    }

    pub fn k(&self) -> usize {
        self.manifest.k
    }

    /// Records and manifest agree on `K` and item ids.
    pub fn validate(&self) -> Result<()> {
        let man = &self.manifest;
        if man.true_labels.len() != man.n_items {
            return Err(SleError::DimensionMismatch {
                expected: man.n_items,
                got: man.true_labels.len(),
            });
        }
        for t in &man.true_labels {
            crate::encoding::check_distribution(t, man.k)?;
        }
        for r in &self.records {
            r.validate(man.k)?;
            if r.item_id as usize >= man.n_items {
                return Err(SleError::InvalidLabel(format!(
                    "item {} is outside the manifest's {} items",
                    r.item_id, man.n_items
                )));
            }
        }
        Ok(())
    }

    /// Mean JSD between each annotation and its item's true label.
    pub fn mean_annotation_jsd(&self) -> Result<f64> {
        if self.records.is_empty() {
            return Err(SleError::Empty("dataset has no annotations"));
        }
        let mut sum = 0.0;
        for r in &self.records {
            let truth = self
                .manifest
                .true_labels
                .get(r.item_id as usize)
                .ok_or_else(|| SleError::InvalidLabel(format!("item {} has no true label", r.item_id)))?;
            sum += jsd(&r.label.to_vector(self.k())?, truth)?;
        }
        Ok(sum / self.records.len() as f64)
    }
}

/// `data.jsonl` → `data.manifest.json`.
pub fn manifest_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("manifest.json")
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| SleError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in &dataset.records {
        let line = serde_json::to_string(r).map_err(|e| SleError::Domain(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| SleError::io(path, e))?;
    }
    out.flush().map_err(|e| SleError::io(path, e))?;
    let mpath = manifest_path(path);
    let mut text = serde_json::to_string_pretty(&dataset.manifest).map_err(|e| SleError::Domain(e.to_string()))?;
    text.push('\n');
    fs::write(&mpath, text).map_err(|e| SleError::io(&mpath, e))
}

/// Parses records one per non-blank line; errors carry the 1-based record number.
pub fn read_records(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let file = fs::File::open(path).map_err(|e| SleError::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| SleError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: AnnotationRecord = serde_json::from_str(&line).map_err(|e| SleError::Parse {
            path: path.to_path_buf(),
            index: i + 1,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| SleError::io(path, e))?;
    let man: Manifest = serde_json::from_str(&text).map_err(|e| SleError::Parse {
        path: path.to_path_buf(),
        index: e.line(),
        message: e.to_string(),
    })?;
    if man.format_version != MANIFEST_FORMAT_VERSION {
        return Err(SleError::Config(format!(
            "unsupported manifest format version {}",
            man.format_version
        )));
    }
    Ok(man)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let records = read_records(path)?;
    let manifest = read_manifest(&manifest_path(path))?;
    let dataset = Dataset { records, manifest };
    dataset.validate()?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, BetaParams};

    fn small() -> Dataset {
        let mut config = SyntheticConfig::new(BetaParams::MEDIUM, BetaParams::LOW, 3);
        config.k = 3;
        config.m = 4;
        config.grid_resolution = 2;
        Dataset::from_synthetic(generate(&config).unwrap(), &config)
    }

    #[test]
    fn corruption_grows_with_uncertainty() {
        let corruption = |set: BetaParams| {
            let config = SyntheticConfig::new(set, set, 11);
            Dataset::from_synthetic(generate(&config).unwrap(), &config).mean_annotation_jsd().unwrap()
        };
        let (none, low, high) = (corruption(BetaParams::NONE), corruption(BetaParams::LOW), corruption(BetaParams::MEDIUM));
        assert!(none < 1e-12);
        assert!(low > 0.0 && low < high, "{low} {high}");
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let data = small();
        write_dataset(&path, &data).unwrap();
        assert!(dir.path().join("d.manifest.json").exists());
        assert_eq!(read_dataset(&path).unwrap(), data);
    }

    #[test]
    fn writes_are_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        write_dataset(&a, &small()).unwrap();
        write_dataset(&b, &small()).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn parse_error_reports_record_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&path, &small()).unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        let third = text.match_indices('\n').nth(1).unwrap().0 + 1;
        text.insert_str(third, "{\"item\": 0, \"label\": }\n");
        fs::write(&path, text).unwrap();
        match read_dataset(&path) {
            Err(SleError::Parse { index, .. }) => assert_eq!(index, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_labels_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let mut data = small();
        data.records[0].label = crate::encoding::Label::Class(7);
        write_dataset(&path, &data).unwrap();
        assert!(read_dataset(&path).is_err());
    }
}
