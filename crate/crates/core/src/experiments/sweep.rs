//! Sweep definitions and the per-task aggregation comparison.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aggregate::{filter_by_reliability, majority_vote, soft_vote, MethodVariant, DEFAULT_FILTER_THRESHOLD};
use crate::encoding::{argmax, build_sle, group_by_item, AnnotationRecord};
use crate::error::{Result, SleError};
use crate::metrics::{predict_label, MetricReport};
use crate::opinion::DEFAULT_EPSILON;
use crate::seed::{derive_path, derive_seed};
use crate::synth::{generate, BetaParams, PermutationRule, SyntheticConfig, SyntheticDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Confident annotators of decreasing reliability.
    ReliabilitySweep,
    /// Reliable annotators of decreasing confidence.
    ConfidenceHighRel,
    /// Unreliable annotators of decreasing confidence.
    ConfidenceLowRel,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::ReliabilitySweep, Scenario::ConfidenceHighRel, Scenario::ConfidenceLowRel];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::ReliabilitySweep => "reliability_sweep",
            Scenario::ConfidenceHighRel => "confidence_high_rel",
            Scenario::ConfidenceLowRel => "confidence_low_rel",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Scenario::ReliabilitySweep => 1,
            Scenario::ConfidenceHighRel => 2,
            Scenario::ConfidenceLowRel => 3,
        }
    }

    /// `(confidence, reliability)` Beta parameters at a sweep value.
    pub fn parameters(self, swept: BetaParams) -> (BetaParams, BetaParams) {
        match self {
            Scenario::ReliabilitySweep => (BetaParams::NONE, swept),
            Scenario::ConfidenceHighRel => (swept, BetaParams(10.0, 1.0)),
            Scenario::ConfidenceLowRel => (swept, BetaParams(1.0, 10.0)),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = SleError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| SleError::Config(format!("unknown scenario `{s}`")))
    }
}

/// A position on the uncertainty axis. `level` runs from 1 (set 1, no
/// uncertainty) to 4 (set 4, high uncertainty); fractional levels are
/// linear interpolations between neighbouring sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub level: f64,
    pub swept: BetaParams,
}

impl SweepPoint {
    pub fn label(&self) -> String {
        format!("{:.2}", self.level)
    }
}

/// The four uncertainty sets with `steps` interpolated points between each
/// neighbouring pair.
pub fn sweep_points(steps: usize) -> Vec<SweepPoint> {
    let levels = BetaParams::LEVELS;
    let mut points = Vec::new();
    for (i, pair) in levels.windows(2).enumerate() {
        for s in 0..=steps {
            let t = s as f64 / (steps + 1) as f64;
            points.push((i as f64 + 1.0 + t, pair[0].lerp(pair[1], t)));
        }
    }
    points.push((levels.len() as f64, levels[levels.len() - 1]));
    points
        .into_iter()
        .enumerate()
        .map(|(index, (level, swept))| SweepPoint { index, level, swept })
        .collect()
}

fn default_scenarios() -> Vec<Scenario> {
    Scenario::ALL.to_vec()
}
fn default_methods() -> Vec<MethodVariant> {
    MethodVariant::ALL.to_vec()
}
fn default_true() -> bool {
    true
}
fn default_threshold() -> f64 {
    DEFAULT_FILTER_THRESHOLD
}
fn default_runs() -> usize {
    10
}
fn default_output_dir() -> std::path::PathBuf {
    "sweep_out".into()
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
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

/// Everything that determines a sweep's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<Scenario>,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodVariant>,
    /// Also evaluate on reliability-filtered annotations.
    #[serde(default = "default_true")]
    pub filter: bool,
    #[serde(default = "default_threshold")]
    pub filter_threshold: f64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: std::path::PathBuf,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_m")]
    pub annotators: usize,
    #[serde(default = "default_resolution")]
    pub grid_resolution: usize,
    /// Interpolated points between neighbouring uncertainty sets.
    #[serde(default)]
    pub interpolation_steps: usize,
    #[serde(default)]
    pub permutation_rule: PermutationRule,
    #[serde(default = "default_true")]
    pub plots: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| SleError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(SleError::Config("runs must be >= 1".into()));
        }
        if self.scenarios.is_empty() {
            return Err(SleError::Config("at least one scenario is required".into()));
        }
        if self.methods.is_empty() {
            return Err(SleError::Config("at least one method is required".into()));
        }
        if !(0.0..=1.0).contains(&self.filter_threshold) {
            return Err(SleError::Config(format!(
                "filter_threshold must lie in [0, 1], got {}",
                self.filter_threshold
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(SleError::Config(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        self.synthetic_config(BetaParams::NONE, BetaParams::NONE, 0).validate()
    }

    pub fn synthetic_config(&self, confidence: BetaParams, reliability: BetaParams, seed: u64) -> SyntheticConfig {
        let mut c = SyntheticConfig::new(confidence, reliability, seed);
        c.k = self.k;
        c.m = self.annotators;
        c.grid_resolution = self.grid_resolution;
        c.runs = self.runs;
        c.permutation_rule = self.permutation_rule;
        c
    }

    pub fn tasks(&self) -> Vec<SweepTask> {
        let points = sweep_points(self.interpolation_steps);
        let mut tasks = Vec::new();
        for &scenario in &self.scenarios {
            for &point in &points {
                for run in 0..self.runs {
                    let seed = derive_path(self.master_seed, &[scenario.tag(), point.index as u64, run as u64]);
                    tasks.push(SweepTask {
                        scenario,
                        point,
                        run,
                        seed,
                    });
                }
            }
        }
        tasks
    }

    /// Rows produced per task.
    pub fn rows_per_task(&self) -> usize {
        self.methods.len() * if self.filter { 2 } else { 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepTask {
    pub scenario: Scenario,
    pub point: SweepPoint,
    pub run: usize,
    pub seed: u64,
}

impl SweepTask {
    pub fn key(&self) -> (Scenario, usize, usize) {
        (self.scenario, self.point.index, self.run)
    }
}

/// One method's scores on one generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario: Scenario,
    pub point: usize,
    pub level: f64,
    pub conf_alpha: f64,
    pub conf_beta: f64,
    pub rel_alpha: f64,
    pub rel_beta: f64,
    pub method: MethodVariant,
    pub filtered: bool,
    pub run: usize,
    pub seed: u64,
    pub f1: f64,
    pub jsd: f64,
    pub nes: f64,
    pub n_items: usize,
    pub nes_variant: String,
}

impl SweepRow {
    pub fn key(&self) -> (Scenario, usize, MethodVariant, bool, usize) {
        (self.scenario, self.point, self.method, self.filtered, self.run)
    }
}

/// Per-item predicted labels and distributions for one method.
pub fn aggregate_items(
    dataset: &SyntheticDataset,
    records: &[AnnotationRecord],
    method: MethodVariant,
    epsilon: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let k = dataset.k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = Vec::with_capacity(dataset.true_labels.len());
    let mut dists = Vec::with_capacity(dataset.true_labels.len());
    for (_, recs) in group_by_item(records) {
        let (label, dist) = match method {
            MethodVariant::MajorityVote => {
                let p = majority_vote(&recs, k, &mut rng)?;
                (argmax(&p), p)
            }
            MethodVariant::SoftVote => {
                let p = soft_vote(&recs, k)?;
                (argmax(&p), p)
            }
            MethodVariant::SleFusion => {
                let op = build_sle(&recs, k, epsilon)?.opinion;
                (predict_label(&op), op.project_probability())
            }
        };
        labels.push(label);
        dists.push(dist);
    }
    Ok((labels, dists))
}

/// Generates the task's dataset and scores every configured method on it.
pub fn run_task(spec: &ExperimentSpec, task: &SweepTask) -> Result<Vec<SweepRow>> {
    let (conf, rel) = task.scenario.parameters(task.point.swept);
    let config = spec.synthetic_config(conf, rel, derive_seed(task.seed, 0));
    let data = generate(&config)?;
    let mut rows = Vec::with_capacity(spec.rows_per_task());
    let conditions: &[bool] = if spec.filter { &[false, true] } else { &[false] };
    for &filtered in conditions {
        let records = if filtered {
            filter_by_reliability(&data.annotations, spec.filter_threshold)
        } else {
            data.annotations.clone()
        };
        for &method in &spec.methods {
            let rng_seed = derive_path(task.seed, &[1, filtered as u64, method as u64]);
            let (labels, dists) = aggregate_items(&data, &records, method, spec.epsilon, rng_seed)?;
            let report = MetricReport::score(method.name(), task.point.label(), &labels, &dists, &data.true_labels)?;
            rows.push(SweepRow {
                scenario: task.scenario,
                point: task.point.index,
                level: task.point.level,
                conf_alpha: conf.0,
                conf_beta: conf.1,
                rel_alpha: rel.0,
                rel_beta: rel.1,
                method,
                filtered,
                run: task.run,
                seed: task.seed,
                f1: report.f1,
                jsd: report.jsd,
                nes: report.nes,
                n_items: report.n_items,
                nes_variant: report.nes_variant,
            });
        }
    }
    Ok(rows)
}

/// Mean scores over runs for one (scenario, point, method, condition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMean {
    pub scenario: Scenario,
    pub point: usize,
    pub level: f64,
    pub conf_alpha: f64,
    pub conf_beta: f64,
    pub rel_alpha: f64,
    pub rel_beta: f64,
    pub method: MethodVariant,
    pub filtered: bool,
    pub runs: usize,
    pub f1: f64,
    pub jsd: f64,
    pub nes: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Sorted by key.
    pub rows: Vec<SweepRow>,
    pub means: Vec<SweepMean>,
}

impl SweepResult {
    pub fn from_rows(mut rows: Vec<SweepRow>) -> Self {
        rows.sort_by_key(|r| r.key());
        let mut means: Vec<SweepMean> = Vec::new();
        let mut start = 0;
        while start < rows.len() {
            let head = &rows[start];
            let group_key = (head.scenario, head.point, head.method, head.filtered);
            let end = start
                + rows[start..]
                    .iter()
                    .take_while(|r| (r.scenario, r.point, r.method, r.filtered) == group_key)
                    .count();
            let group = &rows[start..end];
            let n = group.len() as f64;
            means.push(SweepMean {
                scenario: head.scenario,
                point: head.point,
                level: head.level,
                conf_alpha: head.conf_alpha,
                conf_beta: head.conf_beta,
                rel_alpha: head.rel_alpha,
                rel_beta: head.rel_beta,
                method: head.method,
                filtered: head.filtered,
                runs: group.len(),
                f1: group.iter().map(|r| r.f1).sum::<f64>() / n,
                jsd: group.iter().map(|r| r.jsd).sum::<f64>() / n,
                nes: group.iter().map(|r| r.nes).sum::<f64>() / n,
            });
            start = end;
        }
        SweepResult { rows, means }
    }

    /// Averages over every point of a scenario (the table view).
    pub fn scenario_mean(&self, scenario: Scenario, method: MethodVariant, filtered: bool) -> Option<(f64, f64, f64)> {
        let sel: Vec<&SweepMean> = self
            .means
            .iter()
            .filter(|m| m.scenario == scenario && m.method == method && m.filtered == filtered)
            .collect();
        if sel.is_empty() {
            return None;
        }
        let n = sel.len() as f64;
        Some((
            sel.iter().map(|m| m.f1).sum::<f64>() / n,
            sel.iter().map(|m| m.jsd).sum::<f64>() / n,
            sel.iter().map(|m| m.nes).sum::<f64>() / n,
        ))
    }
}

/// Runs every task sequentially.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    spec.validate()?;
    let mut rows = Vec::new();
    for task in spec.tasks() {
        rows.extend(run_task(spec, &task)?);
    }
    Ok(SweepResult::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            runs: 2,
            grid_resolution: 3,
            annotators: 5,
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn points_cover_the_four_sets() {
        let p = sweep_points(0);
        assert_eq!(p.len(), 4);
        assert_eq!(p.iter().map(|x| x.swept).collect::<Vec<_>>(), BetaParams::LEVELS.to_vec());
        let p = sweep_points(1);
        assert_eq!(p.len(), 7);
        assert_eq!(p[1].swept, BetaParams(10.0, 0.5));
        assert_eq!(p[1].label(), "1.50");
        assert_eq!(p[6].level, 4.0);
    }

    #[test]
    fn scenario_parameters() {
        assert_eq!(
            Scenario::ReliabilitySweep.parameters(BetaParams::HIGH),
            (BetaParams::NONE, BetaParams::HIGH)
        );
        assert_eq!(
            Scenario::ConfidenceLowRel.parameters(BetaParams::LOW),
            (BetaParams::LOW, BetaParams(1.0, 10.0))
        );
        assert!("confidence_mid".parse::<Scenario>().is_err());
    }

    #[test]
    fn spec_parsing() {
        let spec = ExperimentSpec::from_toml("runs = 3\nmethods = [\"mv\", \"sle_fusion\"]\nscenarios = [\"reliability_sweep\"]").unwrap();
        assert_eq!(spec.methods, vec![MethodVariant::MajorityVote, MethodVariant::SleFusion]);
        assert_eq!(spec.scenarios, vec![Scenario::ReliabilitySweep]);
        assert!(ExperimentSpec::from_toml("methods = [\"dawid_skene\"]").is_err());
        assert!(ExperimentSpec::from_toml("runs = 0").is_err());
        assert!(ExperimentSpec::from_toml("rnus = 2").is_err());
    }

    #[test]
    fn task_seeds_are_distinct() {
        let spec = small_spec();
        let tasks = spec.tasks();
        assert_eq!(tasks.len(), 3 * 4 * 2);
        let mut seeds: Vec<u64> = tasks.iter().map(|t| t.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), tasks.len());
    }

    #[test]
    fn single_run_means_equal_rows() {
        let spec = ExperimentSpec { runs: 1, ..small_spec() };
        let result = run_sweep(&spec).unwrap();
        assert_eq!(result.rows.len(), result.means.len());
        for (r, m) in result.rows.iter().zip(&result.means) {
            assert_eq!((r.f1, r.jsd, r.nes), (m.f1, m.jsd, m.nes));
        }
    }

    #[test]
    fn no_uncertainty_is_perfect() {
        let spec = ExperimentSpec {
            scenarios: vec![Scenario::ReliabilitySweep],
            ..small_spec()
        };
        let result = run_sweep(&spec).unwrap();
        for m in result.means.iter().filter(|m| m.point == 0) {
            assert_eq!(m.f1, 1.0, "{:?}", m.method);
        }
    }

    #[test]
    fn tasks_are_independent_of_order() {
        let spec = small_spec();
        let tasks = spec.tasks();
        let forward: Vec<_> = tasks.iter().flat_map(|t| run_task(&spec, t).unwrap()).collect();
        let backward: Vec<_> = tasks.iter().rev().flat_map(|t| run_task(&spec, t).unwrap()).collect();
        assert_eq!(SweepResult::from_rows(forward), SweepResult::from_rows(backward));
    }
}
