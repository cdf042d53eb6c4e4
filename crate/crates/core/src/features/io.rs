use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AlignedDataset, DatasetLayout, FeatureError, FeatureWindow, SentimentFlags};
use crate::sentiment::SentimentScore;

/// Contents of `<dataset>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    k: usize,
    flags: SentimentFlags,
    /// `(target_block, last_timestamp)` per window, in file order.
    windows: Vec<(u64, i64)>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn file_err(path: &Path, message: impl ToString) -> FeatureError {
    FeatureError::File {
        path: path.to_owned(),
        message: message.to_string(),
    }
}

/// Writes the dataset CSV (raw, unscaled features) and its metadata sidecar.
pub fn export_dataset(dataset: &AlignedDataset, path: &Path) -> Result<(), FeatureError> {
    let layout = dataset.layout();
    let mut writer = csv::Writer::from_path(path).map_err(|e| file_err(path, e))?;
    let mut header = layout.feature_names();
    header.push("target_y".into());
    writer.write_record(&header).map_err(|e| file_err(path, e))?;
    for w in dataset.windows() {
        let mut row: Vec<String> = w.alphas.iter().map(f64::to_string).collect();
        row.extend(w.betas.iter().map(u64::to_string));
        for gamma in [w.gamma_hour, w.gamma_day].into_iter().flatten() {
            row.extend(gamma.as_array().iter().map(f64::to_string));
        }
        row.push(w.target_y.to_string());
        writer.write_record(&row).map_err(|e| file_err(path, e))?;
    }
    writer.flush().map_err(|e| file_err(path, e))?;

    let meta_path = sidecar_path(path);
    let sidecar = Sidecar {
        k: layout.k,
        flags: layout.flags,
        windows: dataset
            .windows()
            .iter()
            .map(|w| (w.target_block, w.last_timestamp))
            .collect(),
    };
    let mut out = BufWriter::new(File::create(&meta_path).map_err(|e| file_err(&meta_path, e))?);
    serde_json::to_writer(&mut out, &sidecar).map_err(|e| file_err(&meta_path, e))?;
    out.flush().map_err(|e| file_err(&meta_path, e))
}

/// Reads a dataset written by [`export_dataset`]. The sidecar must sit next
/// to the CSV.
pub fn import_dataset(path: &Path) -> Result<AlignedDataset, FeatureError> {
    let meta_path = sidecar_path(path);
    let meta_file = File::open(&meta_path).map_err(|e| file_err(&meta_path, e))?;
    let sidecar: Sidecar = serde_json::from_reader(BufReader::new(meta_file)).map_err(|e| file_err(&meta_path, e))?;
    let layout = DatasetLayout {
        k: sidecar.k,
        flags: sidecar.flags,
    };
    let mut expected = layout.feature_names();
    expected.push("target_y".into());

    let mut reader = csv::Reader::from_path(path).map_err(|e| file_err(path, e))?;
    let header = reader.headers().map_err(|e| file_err(path, e))?.clone();
    if header.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(file_err(
            path,
            format!("header does not match `{}`", expected.join(",")),
        ));
    }

    let mut windows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| file_err(path, format!("line {line}: {e}")))?;
        let row_err = |msg: String| file_err(path, format!("line {line}: {msg}"));
        let field = |j: usize| record.get(j).unwrap_or("").trim();
        let float = |j: usize| {
            field(j)
                .parse::<f64>()
                .map_err(|e| row_err(format!("column {}: {e}", expected[j])))
        };
        let k = layout.k;
        let alphas = (0..k).map(float).collect::<Result<Vec<_>, _>>()?;
        let betas = (k..2 * k)
            .map(|j| {
                field(j)
                    .parse::<u64>()
                    .map_err(|e| row_err(format!("column {}: {e}", expected[j])))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut col = 2 * k;
        let mut gamma = |present: bool| -> Result<Option<SentimentScore>, FeatureError> {
            if !present {
                return Ok(None);
            }
            let (p, n, u) = (float(col)?, float(col + 1)?, float(col + 2)?);
            col += 3;
            SentimentScore::new(p, n, u)
                .map(Some)
                .map_err(|e| row_err(e.to_string()))
        };
        let gamma_hour = gamma(layout.flags.use_hour_sentiment)?;
        let gamma_day = gamma(layout.flags.use_day_sentiment)?;
        let target_y = float(expected.len() - 1)?;
        let &(target_block, last_timestamp) = sidecar
            .windows
            .get(i)
            .ok_or_else(|| row_err("more rows than the sidecar lists".into()))?;
        windows.push(FeatureWindow {
            alphas,
            betas,
            gamma_hour,
            gamma_day,
            target_y,
            target_block,
            last_timestamp,
        });
    }
    if windows.len() != sidecar.windows.len() {
        return Err(file_err(
            path,
            format!("{} rows but the sidecar lists {}", windows.len(), sidecar.windows.len()),
        ));
    }
    AlignedDataset::new(windows, layout)
}
