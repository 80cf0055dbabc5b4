//! Plain-text model files:
//!
//! ```text
//! sle-model 1
//! k 3
//! activation tanh
//! layers 1
//! layer 2 4
//! w 0.1 -0.2
//! ...
//! b 0 0 0 0
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Activation, Layer, ModelParams};
use crate::error::{Result, SleError};

pub const MODEL_FORMAT_VERSION: u32 = 1;

impl ModelParams {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "sle-model {MODEL_FORMAT_VERSION}");
        let _ = writeln!(out, "k {}", self.k);
        let _ = writeln!(out, "activation {}", self.activation.name());
        let _ = writeln!(out, "layers {}", self.layers.len());
        for l in &self.layers {
            let _ = writeln!(out, "layer {} {}", l.inputs, l.outputs);
            for row in l.weights.chunks(l.inputs.max(1)) {
                out.push('w');
                for v in row {
                    let _ = write!(out, " {v:?}");
                }
                out.push('\n');
            }
            out.push('b');
            for v in &l.bias {
                let _ = write!(out, " {v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, path: &Path) -> Result<ModelParams> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let err = |index: usize, message: String| SleError::Parse {
            path: path.to_path_buf(),
            index: index + 1,
            message,
        };
        let mut next = |expect: &str| -> Result<(usize, Vec<&str>)> {
            let (i, line) = lines.next().ok_or_else(|| err(text.lines().count(), format!("expected `{expect}`, found end of file")))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields[0] != expect {
                return Err(err(i, format!("expected `{expect}`, found `{}`", fields[0])));
            }
            Ok((i, fields[1..].to_vec()))
        };
        let parse_usize = |i: usize, s: Option<&&str>| -> Result<usize> {
            s.and_then(|v| v.parse().ok()).ok_or_else(|| err(i, "expected a non-negative integer".into()))
        };
        let parse_row = |i: usize, fields: &[&str], n: usize| -> Result<Vec<f64>> {
            if fields.len() != n {
                return Err(err(i, format!("expected {n} values, found {}", fields.len())));
            }
            fields
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| err(i, format!("bad number `{f}`: {e}"))))
                .collect()
        };

        let (i, v) = next("sle-model")?;
        if parse_usize(i, v.first())? != MODEL_FORMAT_VERSION as usize {
            return Err(err(i, format!("unsupported model format version {}", v[0])));
        }
        let (i, v) = next("k")?;
        let k = parse_usize(i, v.first())?;
        let (i, v) = next("activation")?;
        let activation = match v.first().copied() {
            Some("tanh") => Activation::Tanh,
            Some("relu") => Activation::Relu,
            other => return Err(err(i, format!("unknown activation {other:?}"))),
        };
        let (i, v) = next("layers")?;
        let n_layers = parse_usize(i, v.first())?;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let (i, v) = next("layer")?;
            let inputs = parse_usize(i, v.first())?;
            let outputs = parse_usize(i, v.get(1))?;
            let mut weights = Vec::with_capacity(inputs * outputs);
            for _ in 0..outputs {
                let (i, v) = next("w")?;
                weights.extend(parse_row(i, &v, inputs)?);
            }
            let (i, v) = next("b")?;
            let bias = parse_row(i, &v, outputs)?;
            layers.push(Layer {
                inputs,
                outputs,
                weights,
                bias,
            });
        }
        let params = ModelParams { k, activation, layers };
        params.validate()?;
        Ok(params)
    }
}

pub fn write_model(path: &Path, params: &ModelParams) -> Result<()> {
    fs::write(path, params.to_text()).map_err(|e| SleError::io(path, e))
}

pub fn read_model(path: &Path) -> Result<ModelParams> {
    let text = fs::read_to_string(path).map_err(|e| SleError::io(path, e))?;
    ModelParams::from_text(&text, path)
}
