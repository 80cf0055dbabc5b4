//! WebAssembly bindings for the browser demo: fusing a handful of
//! three-class annotations, comparing aggregation methods at one sweep
//! point, and contrasting forward and reverse KL between two Dirichlets.
//!
//! Every export takes and returns plain numbers, byte buffers or JSON
//! strings so the page needs no generated TypeScript glue.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use sle::aggregate::{soft_vote, MethodVariant};
use sle::encoding::{encode_annotation, Label};
use sle::experiments::{run_task, sweep_points, ExperimentSpec, Scenario, SweepResult};
use sle::special::lgamma;
use sle::{build_sle, dirichlet_kl, AnnotationRecord, DirichletParams, ReliabilityScore, Result, SleError};

const K: usize = 3;
const SET_NAMES: [&str; 4] = ["None", "Low", "Medium", "High"];

#[derive(Debug, Clone, Deserialize)]
pub struct DemoAnnotation {
    pub label: usize,
    pub confidence: f64,
    pub reliability: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OpinionView {
    pub belief: Vec<f64>,
    pub uncertainty: f64,
    pub projected: Vec<f64>,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FusionView {
    pub annotators: Vec<OpinionView>,
    pub fused: OpinionView,
    pub soft_vote: Vec<f64>,
}

fn view(op: &sle::Opinion, epsilon: f64) -> Result<OpinionView> {
    let alpha = op.smooth_if_dogmatic(epsilon)?.to_dirichlet()?.alpha().to_vec();
    Ok(OpinionView {
        belief: op.belief().to_vec(),
        uncertainty: op.uncertainty(),
        projected: op.project_probability(),
        alpha,
    })
}

fn records(annotations: &[DemoAnnotation]) -> Vec<AnnotationRecord> {
    annotations
        .iter()
        .enumerate()
        .map(|(i, a)| AnnotationRecord {
            item_id: 0,
            annotator_id: i as u64,
            label: Label::Class(a.label),
            confidence: Some(a.confidence),
            reliability: Some(a.reliability),
        })
        .collect()
}

pub fn fuse_json(annotations: &str, epsilon: f64) -> Result<String> {
    let parsed: Vec<DemoAnnotation> = serde_json::from_str(annotations).map_err(|e| SleError::Config(e.to_string()))?;
    let recs = records(&parsed);
    let fused = build_sle(&recs, K, epsilon)?.opinion;
    let annotators = recs
        .iter()
        .map(|r| {
            let trust = ReliabilityScore::new(r.reliability_or_default())?;
            view(&encode_annotation(r, K)?.trust_discount(trust)?, epsilon)
        })
        .collect::<Result<Vec<_>>>()?;
    let out = FusionView {
        annotators,
        fused: view(&fused, epsilon)?,
        soft_vote: soft_vote(&recs, K)?,
    };
    serde_json::to_string(&out).map_err(|e| SleError::Domain(e.to_string()))
}

fn log_norm(alpha: &[f64]) -> Result<f64> {
    let mut norm = lgamma(alpha.iter().sum())?;
    for &a in alpha {
        norm -= lgamma(a)?;
    }
    Ok(norm)
}

/// Barycentric coordinates of pixel centre `(px, py)` in a triangle with
/// class 0 at the top, class 1 bottom left and class 2 bottom right.
fn barycentric(px: f64, py: f64, size: f64) -> [f64; 3] {
    let pad = 0.06 * size;
    let (top, bottom) = (pad, size - pad);
    let (left, right) = (pad, size - pad);
    let height = bottom - top;
    let l0 = (bottom - py) / height;
    let width_at = (right - left) * (1.0 - l0);
    let start = left + (right - left) * l0 / 2.0;
    let along = if width_at > 0.0 { (px - start) / width_at } else { 0.5 };
    [l0, (1.0 - l0) * (1.0 - along), (1.0 - l0) * along]
}

fn viridis(t: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = (STOPS[i][c] + f * (STOPS[i + 1][c] - STOPS[i][c])).round() as u8;
    }
    out
}

/// RGBA pixels of the log density of `Dir(alpha)` over the 2-simplex,
/// scaled to the range seen inside the triangle; outside is transparent.
pub fn density_rgba(alpha: &[f64], size: usize) -> Result<Vec<u8>> {
    let params = DirichletParams::new(alpha.to_vec())?;
    if params.k() != K {
        return Err(SleError::DimensionMismatch { expected: K, got: params.k() });
    }
    if size == 0 {
        return Err(SleError::Empty("image size"));
    }
    let norm = log_norm(params.alpha())?;
    let mut logs = vec![f64::NAN; size * size];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for y in 0..size {
        for x in 0..size {
            let b = barycentric(x as f64 + 0.5, y as f64 + 0.5, size as f64);
            if b.iter().all(|&v| v > 1e-9) {
                let v = norm + params.alpha().iter().zip(&b).map(|(a, x)| (a - 1.0) * x.ln()).sum::<f64>();
                if v.is_finite() {
                    logs[y * size + x] = v;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut rgba = vec![0u8; size * size * 4];
    for (i, v) in logs.iter().enumerate() {
        if v.is_finite() {
            let [r, g, b] = viridis((v - lo) / span);
            rgba[4 * i..4 * i + 4].copy_from_slice(&[r, g, b, 255]);
        }
    }
    Ok(rgba)
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodScore {
    pub method: String,
    pub filtered: bool,
    pub f1: f64,
    pub jsd: f64,
    pub nes: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointView {
    pub scenario: String,
    pub label: String,
    pub confidence_beta: [f64; 2],
    pub reliability_beta: [f64; 2],
    pub runs: usize,
    pub scores: Vec<MethodScore>,
}

pub fn sweep_point_json(scenario: &str, point: usize, runs: usize, seed: u64) -> Result<String> {
    let scenario: Scenario = scenario.parse()?;
    let spec = ExperimentSpec {
        scenarios: vec![scenario],
        runs,
        master_seed: seed,
        plots: false,
        ..ExperimentSpec::default()
    };
    spec.validate()?;
    let p = *sweep_points(0)
        .get(point)
        .filter(|_| point < SET_NAMES.len())
        .ok_or_else(|| SleError::Config(format!("sweep point {point} out of range")))?;
    let mut rows = Vec::new();
    for task in spec.tasks().iter().filter(|t| t.point.index == p.index) {
        rows.extend(run_task(&spec, task)?);
    }
    let result = SweepResult::from_rows(rows);
    let first = result.rows.first().ok_or(SleError::Empty("no rows"))?;
    let mut scores = Vec::new();
    for method in MethodVariant::ALL {
        for filtered in [false, true] {
            if let Some((f1, jsd, nes)) = result.scenario_mean(scenario, method, filtered) {
                scores.push(MethodScore {
                    method: method.name().to_string(),
                    filtered,
                    f1,
                    jsd,
                    nes,
                });
            }
        }
    }
    let out = PointView {
        scenario: scenario.name().to_string(),
        label: SET_NAMES[point].to_string(),
        confidence_beta: [first.conf_alpha, first.conf_beta],
        reliability_beta: [first.rel_alpha, first.rel_beta],
        runs,
        scores,
    };
    serde_json::to_string(&out).map_err(|e| SleError::Domain(e.to_string()))
}

/// `[KL(target || predicted), KL(predicted || target)]`.
pub fn kl_pair(target: &[f64], predicted: &[f64]) -> Result<[f64; 2]> {
    let p = DirichletParams::new(target.to_vec())?;
    let q = DirichletParams::new(predicted.to_vec())?;
    Ok([dirichlet_kl(&p, &q)?, dirichlet_kl(&q, &p)?])
}

fn js_err(e: SleError) -> JsError {
    JsError::new(&e.to_string())
}

/// Fuses a JSON list of `{label, confidence, reliability}` annotations.
#[wasm_bindgen]
pub fn fuse(annotations: &str, epsilon: f64) -> std::result::Result<String, JsError> {
    fuse_json(annotations, epsilon).map_err(js_err)
}

/// A `size` x `size` RGBA image of a three-class Dirichlet density.
#[wasm_bindgen]
pub fn density_image(alpha: &[f64], size: usize) -> std::result::Result<Vec<u8>, JsError> {
    density_rgba(alpha, size).map_err(js_err)
}

/// Mean MV, Soft and SLE scores at one point of a scenario's sweep.
#[wasm_bindgen]
pub fn sweep_point(scenario: &str, point: usize, runs: usize, seed: u32) -> std::result::Result<String, JsError> {
    sweep_point_json(scenario, point, runs, u64::from(seed)).map_err(js_err)
}

/// Forward and reverse KL between two three-class Dirichlets.
#[wasm_bindgen]
pub fn kl_divergences(target: &[f64], predicted: &[f64]) -> std::result::Result<Vec<f64>, JsError> {
    kl_pair(target, predicted).map(|v| v.to_vec()).map_err(js_err)
}
