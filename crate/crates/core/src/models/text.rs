//! Plain-text model files.
//!
//! ```text
//! gasforge-model 1
//! kind nam
//! k 3
//! setting +OC,-DS,-HS
//! features 6
//! hidden 32 32
//! activation tanh
//! scaler <beta_mean> <beta_std>
//! params <count>
//! <one parameter per line, row-major, in the model's flat order>
//! ```
//!
//! Linear models have an empty `hidden` line and parameters `w_1..w_p, b`.
//! MLP parameters run layer by layer, weights (`out x in`) then biases. NAM
//! parameters are the per-feature subnetworks in column order, each laid out
//! like an MLP with input width 1, then the global bias. Floats are written
//! in shortest round-trip form, so save then load is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::forecaster::TrainedModel;
use super::train::Differentiable;
use super::{LinearModel, MlpModel, Model, ModelError, NamModel};
use crate::features::{DatasetLayout, FeatureScaler};

const MAGIC: &str = "gasforge-model 1";

pub fn write_model<W: Write>(trained: &TrainedModel, mut out: W) -> Result<(), ModelError> {
    let (kind, hidden, params): (&str, Vec<usize>, &[f64]) = match &trained.model {
        Model::Linear(m) => ("linear", Vec::new(), m.params()),
        Model::Mlp(m) => ("mlp", m.hidden().to_vec(), m.params()),
        Model::Nam(m) => ("nam", m.hidden().to_vec(), m.params()),
        Model::External(_) => {
            return Err(ModelError::InvalidConfig(
                "externally trained models cannot be saved".into(),
            ))
        }
    };
    let hidden: Vec<String> = hidden.iter().map(usize::to_string).collect();
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "kind {kind}")?;
    writeln!(out, "k {}", trained.layout.k)?;
    writeln!(out, "setting {}", trained.layout.flags)?;
    writeln!(out, "features {}", trained.layout.n_features())?;
    writeln!(out, "hidden {}", hidden.join(" "))?;
    writeln!(out, "activation tanh")?;
    writeln!(out, "scaler {} {}", trained.scaler.beta_mean, trained.scaler.beta_std)?;
    writeln!(out, "params {}", params.len())?;
    for p in params {
        writeln!(out, "{p}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_model(trained: &TrainedModel, path: &Path) -> Result<(), ModelError> {
    write_model(trained, BufWriter::new(File::create(path)?))
}

pub fn read_model<R: BufRead>(input: R) -> Result<TrainedModel, ModelError> {
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |key: &str| -> Result<(usize, String), ModelError> {
        let (line, text) = lines.next().ok_or(ModelError::Parse {
            line: 0,
            message: format!("file ends before `{key}`"),
        })?;
        let text = text?;
        let rest = if key.is_empty() {
            text.trim().to_owned()
        } else {
            text.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' ').or(if r.is_empty() { Some("") } else { None }))
                .ok_or_else(|| ModelError::Parse {
                    line,
                    message: format!("expected `{key}`, found `{text}`"),
                })?
                .trim()
                .to_owned()
        };
        Ok((line, rest))
    };
    let parse_err = |line: usize, message: String| ModelError::Parse { line, message };

    let (line, magic) = next("")?;
    if magic != MAGIC {
        return Err(parse_err(line, format!("not a model file (`{magic}`)")));
    }
    let (_, kind) = next("kind")?;
    let (line, k) = next("k")?;
    let k: usize = k.parse().map_err(|e| parse_err(line, format!("k: {e}")))?;
    let (line, setting) = next("setting")?;
    let flags = setting.parse().map_err(|e| parse_err(line, format!("{e}")))?;
    let layout = DatasetLayout { k, flags };
    let (line, features) = next("features")?;
    let features: usize = features
        .parse()
        .map_err(|e| parse_err(line, format!("features: {e}")))?;
    if features != layout.n_features() {
        return Err(parse_err(
            line,
            format!(
                "{features} features but k = {k} with `{setting}` has {}",
                layout.n_features()
            ),
        ));
    }
    let (line, hidden) = next("hidden")?;
    let hidden = hidden
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<Vec<usize>, _>>()
        .map_err(|e| parse_err(line, format!("hidden: {e}")))?;
    let (line, activation) = next("activation")?;
    if activation != "tanh" {
        return Err(parse_err(line, format!("unsupported activation `{activation}`")));
    }
    let (line, scaler) = next("scaler")?;
    let scaler: Vec<f64> = scaler
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e| parse_err(line, format!("scaler: {e}")))?;
    let [beta_mean, beta_std] = scaler[..] else {
        return Err(parse_err(line, "scaler needs mean and std".into()));
    };
    let (line, count) = next("params")?;
    let count: usize = count.parse().map_err(|e| parse_err(line, format!("params: {e}")))?;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, v) = next("")?;
        params.push(
            v.parse::<f64>()
                .map_err(|e| parse_err(line, format!("parameter: {e}")))?,
        );
    }
    if let Some((line, Ok(extra))) = lines.next() {
        if !extra.trim().is_empty() {
            return Err(parse_err(line, "trailing data after parameters".into()));
        }
    }

    let model = match kind.as_str() {
        "linear" => {
            if params.len() != features + 1 || !hidden.is_empty() {
                return Err(parse_err(0, "linear model shape does not match header".into()));
            }
            let bias = params.pop().unwrap_or_default();
            Model::Linear(LinearModel::new(params, bias))
        }
        "mlp" => {
            let mut widths = vec![features];
            widths.extend(&hidden);
            widths.push(1);
            Model::Mlp(MlpModel::from_parts(widths, params)?)
        }
        "nam" => Model::Nam(NamModel::from_parts(features, &hidden, params)?),
        other => return Err(ModelError::UnknownKind(other.to_owned())),
    };
    Ok(TrainedModel {
        model,
        layout,
        scaler: FeatureScaler { beta_mean, beta_std },
    })
}

pub fn load_model(path: &Path) -> Result<TrainedModel, ModelError> {
    read_model(BufReader::new(File::open(path)?))
}
