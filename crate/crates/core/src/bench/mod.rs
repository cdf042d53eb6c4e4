//! Experiment harness: seeded trials over the period x k x setting matrix,
//! reactive vs proactive comparisons, reports and plot data.

mod compare;
mod plots;
mod report;
mod synthetic;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{
    align_sentiment, build_windows, chronological_split, import_dataset, AlignedDataset, DatasetLayout, FeatureError,
    FeatureScaler, SentimentFlags,
};
use crate::fee::{FeeError, MechanismParams};
use crate::ingest::{import_blocks, IngestError, IngestSource};
use crate::matrix::Matrix;
use crate::models::{
    mse, variance, Fitted, ModelError, ModelRegistry, Regressor, TrainConfig, TrainData, TrainedModel,
};
use crate::sentiment::{import_series, Interval, SentimentError, SentimentSeries};

pub use compare::{
    compare_mechanisms, compare_on, Comparison, ComparisonReport, PredictorSpec, SimulationConfig, TrajectorySummary,
};
pub use plots::{write_fee_paths, write_loss_curve, write_predictions};
pub use report::{emit_report, parse_report, read_csv, render_markdown, write_csv, ReportFormat, ReportRow};
pub use synthetic::{synthetic_period, write_period, PeriodFiles, SyntheticPeriod, SyntheticPeriodSpec};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error("dataset does not match the experiment: {0}")]
    DatasetMismatch(String),
    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: ModelError,
    },
    #[error("cell {period} k={k} {setting} {model}: {source}")]
    Cell {
        period: String,
        k: usize,
        setting: SentimentFlags,
        model: String,
        #[source]
        source: Box<BenchError>,
    },
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Fee(#[from] FeeError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Sentiment(#[from] SentimentError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn yes() -> bool {
    true
}
fn default_model() -> String {
    "nam-monotonic".to_owned()
}
fn default_trials() -> usize {
    5
}
fn default_train_fraction() -> f64 {
    0.8
}

/// One cell of the experiment matrix.
///
/// Data comes either from an exported dataset (`dataset`, whose window
/// length and sentiment columns must match `k` and the flags) or from raw
/// files (`blocks` plus `hourly`/`daily` series as the flags require).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub period: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hourly: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub daily: Option<PathBuf>,
    pub k: usize,
    #[serde(default = "yes")]
    pub use_onchain: bool,
    #[serde(default)]
    pub use_day_sentiment: bool,
    #[serde(default)]
    pub use_hour_sentiment: bool,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub mechanism: MechanismParams,
}

impl ExperimentSpec {
    /// A spec reading raw period files, with every other field at its default.
    pub fn from_files(period: &str, files: &PeriodFiles, k: usize, flags: SentimentFlags) -> Self {
        ExperimentSpec {
            period: period.to_owned(),
            dataset: None,
            blocks: Some(files.blocks.clone()),
            hourly: Some(files.hourly.clone()),
            daily: Some(files.daily.clone()),
            k,
            use_onchain: true,
            use_day_sentiment: flags.use_day_sentiment,
            use_hour_sentiment: flags.use_hour_sentiment,
            model: default_model(),
            trials: default_trials(),
            base_seed: 0,
            train_fraction: default_train_fraction(),
            train: TrainConfig::default(),
            mechanism: MechanismParams::default(),
        }
    }

    pub fn flags(&self) -> SentimentFlags {
        SentimentFlags {
            use_hour_sentiment: self.use_hour_sentiment,
            use_day_sentiment: self.use_day_sentiment,
        }
    }

    pub fn layout(&self) -> DatasetLayout {
        DatasetLayout {
            k: self.k,
            flags: self.flags(),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Spec(m));
        if !self.use_onchain {
            return bad("on-chain features cannot be switched off".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.period.trim().is_empty() {
            return bad("period label is empty".into());
        }
        match (&self.dataset, &self.blocks) {
            (Some(_), Some(_)) => return bad("give either `dataset` or `blocks`, not both".into()),
            (None, None) => return bad("no data source: set `dataset` or `blocks`".into()),
            (None, Some(_)) => {
                if self.use_hour_sentiment && self.hourly.is_none() {
                    return bad("hour sentiment requested without an `hourly` series".into());
                }
                if self.use_day_sentiment && self.daily.is_none() {
                    return bad("day sentiment requested without a `daily` series".into());
                }
            }
            (Some(_), None) => {}
        }
        self.train.validate()?;
        self.mechanism.validate()?;
        Ok(())
    }

    /// Reads a spec (or, with [`load_specs`], a list of them) from JSON.
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Accepts a single spec object or an array of specs.
pub fn load_specs(path: &Path) -> Result<Vec<ExperimentSpec>, BenchError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<ExperimentSpec>),
        One(Box<ExperimentSpec>),
    }
    let text = std::fs::read_to_string(path)?;
    Ok(match serde_json::from_str(&text)? {
        OneOrMany::Many(v) => v,
        OneOrMany::One(s) => vec![*s],
    })
}

/// The 2 x 3 x 4 grid: for each period, k = 3, 2, 1 under each of the four
/// sentiment settings, all with `template`'s remaining fields.
pub fn full_grid(periods: &[(String, PeriodFiles)], template: &ExperimentSpec) -> Vec<ExperimentSpec> {
    let mut specs = Vec::new();
    for (label, files) in periods {
        for k in [3, 2, 1] {
            for flags in SentimentFlags::ALL {
                let base = ExperimentSpec::from_files(label, files, k, flags);
                specs.push(ExperimentSpec {
                    model: template.model.clone(),
                    trials: template.trials,
                    base_seed: template.base_seed,
                    train_fraction: template.train_fraction,
                    train: template.train.clone(),
                    mechanism: template.mechanism,
                    ..base
                });
            }
        }
    }
    specs
}

fn load_series(
    path: Option<&PathBuf>,
    wanted: bool,
    interval: Interval,
) -> Result<Option<SentimentSeries>, BenchError> {
    match path {
        Some(p) if wanted => Ok(Some(import_series(p, interval)?)),
        _ => Ok(None),
    }
}

/// Loads and aligns the data an experiment names.
pub fn load_dataset(spec: &ExperimentSpec) -> Result<AlignedDataset, BenchError> {
    spec.validate()?;
    if let Some(path) = &spec.dataset {
        let dataset = import_dataset(path)?;
        if dataset.layout() != spec.layout() {
            return Err(BenchError::DatasetMismatch(format!(
                "{} has k = {} and `{}`, experiment asks for k = {} and `{}`",
                path.display(),
                dataset.k(),
                dataset.flags(),
                spec.k,
                spec.flags()
            )));
        }
        return Ok(dataset);
    }
    let blocks_path = spec.blocks.as_ref().expect("validated");
    let blocks = import_blocks(&IngestSource::infer(&blocks_path.to_string_lossy())?)?;
    let windows = build_windows(&blocks, spec.k, &spec.mechanism)?;
    let hourly = load_series(spec.hourly.as_ref(), spec.use_hour_sentiment, Interval::Hour)?;
    let daily = load_series(spec.daily.as_ref(), spec.use_day_sentiment, Interval::Day)?;
    Ok(align_sentiment(&windows, hourly.as_ref(), daily.as_ref(), spec.flags())?.dataset)
}

/// Train and test design matrices; the scaler is fitted on the train split.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub layout: DatasetLayout,
    pub scaler: FeatureScaler,
    pub train: AlignedDataset,
    pub test: AlignedDataset,
    pub x_train: Matrix,
    pub y_train: Vec<f64>,
    pub x_test: Matrix,
    pub y_test: Vec<f64>,
}

pub fn prepare(dataset: &AlignedDataset, train_fraction: f64) -> Result<Prepared, BenchError> {
    let (train, test) = chronological_split(dataset, train_fraction)?;
    let scaler = FeatureScaler::fit(&train);
    let (x_train, y_train) = scaler.design_matrix(&train);
    let (x_test, y_test) = scaler.design_matrix(&test);
    Ok(Prepared {
        layout: dataset.layout(),
        scaler,
        train,
        test,
        x_train,
        y_train,
        x_test,
        y_test,
    })
}

/// One seeded training run and its test-split evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub seed: u64,
    pub trained: TrainedModel,
    pub fitted: Fitted,
    pub predictions: Vec<f64>,
    pub test_mse: f64,
}

pub fn run_trial(
    prepared: &Prepared,
    model: &str,
    config: &TrainConfig,
    seed: u64,
    registry: &ModelRegistry,
) -> Result<TrialOutcome, ModelError> {
    let config = TrainConfig { seed, ..config.clone() };
    let data = TrainData {
        x: &prepared.x_train,
        y: &prepared.y_train,
        layout: prepared.layout,
    };
    let fitted = registry.fit(model, &data, &config)?;
    let predictions = fitted.model.predict(&prepared.x_test)?;
    let test_mse = mse(&predictions, &prepared.y_test)?;
    if !test_mse.is_finite() {
        return Err(ModelError::Divergence {
            epoch: fitted.loss_curve.len().saturating_sub(1),
        });
    }
    Ok(TrialOutcome {
        seed,
        trained: TrainedModel {
            model: fitted.model.clone(),
            layout: prepared.layout,
            scaler: prepared.scaler,
        },
        fitted,
        predictions,
        test_mse,
    })
}

/// Trials `0..spec.trials` with seeds `base_seed + t`, aggregated into one
/// row (mean test MSE, population variance across trials).
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ReportRow, BenchError> {
    run_experiment_with(spec, &ModelRegistry::with_builtins())
}

pub fn run_experiment_with(spec: &ExperimentSpec, registry: &ModelRegistry) -> Result<ReportRow, BenchError> {
    let dataset = load_dataset(spec)?;
    let prepared = prepare(&dataset, spec.train_fraction)?;
    let mut losses = Vec::with_capacity(spec.trials);
    for t in 0..spec.trials {
        let seed = spec.base_seed.wrapping_add(t as u64);
        let outcome = run_trial(&prepared, &spec.model, &spec.train, seed, registry)
            .map_err(|source| BenchError::Trial { trial: t, source })?;
        log::debug!(
            "{} k={} {} trial {t}: test mse {}",
            spec.period,
            spec.k,
            spec.flags(),
            outcome.test_mse
        );
        losses.push(outcome.test_mse);
    }
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    Ok(ReportRow {
        period: spec.period.clone(),
        k: spec.k,
        setting: spec.flags(),
        model: spec.model.clone(),
        mse: mean,
        variance: variance(&losses)?,
        trials: spec.trials,
    })
}

/// A matrix cell's coordinates and outcome.
#[derive(Debug)]
pub struct Cell {
    pub period: String,
    pub k: usize,
    pub setting: SentimentFlags,
    pub model: String,
    pub result: Result<ReportRow, BenchError>,
}

#[derive(Debug, Default)]
pub struct MatrixOutcome {
    /// In report order: periods as first listed, k descending, settings in
    /// column order, then model name.
    pub cells: Vec<Cell>,
}

impl MatrixOutcome {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.cells
            .iter()
            .filter_map(|c| c.result.as_ref().ok().cloned())
            .collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.result.is_err())
    }

    pub fn all_succeeded(&self) -> bool {
        self.failures().next().is_none()
    }
}

pub fn run_matrix(specs: &[ExperimentSpec]) -> Result<MatrixOutcome, BenchError> {
    run_matrix_with(specs, &ModelRegistry::with_builtins())
}

/// Runs every cell (in parallel); a failing cell is reported in place and
/// does not affect the others.
pub fn run_matrix_with(specs: &[ExperimentSpec], registry: &ModelRegistry) -> Result<MatrixOutcome, BenchError> {
    if specs.is_empty() {
        return Err(BenchError::Spec("experiment matrix is empty".into()));
    }
    let mut periods: Vec<&str> = Vec::new();
    for s in specs {
        if !periods.contains(&s.period.as_str()) {
            periods.push(&s.period);
        }
    }
    let mut order: Vec<usize> = (0..specs.len()).collect();
    order.sort_by(|&a, &b| {
        let key = |s: &ExperimentSpec| {
            let p = periods.iter().position(|p| *p == s.period).unwrap_or(usize::MAX);
            (p, std::cmp::Reverse(s.k), s.flags().column())
        };
        key(&specs[a])
            .cmp(&key(&specs[b]))
            .then_with(|| specs[a].model.cmp(&specs[b].model))
    });
    let cells = order
        .par_iter()
        .map(|&i| {
            let spec = &specs[i];
            let result = run_experiment_with(spec, registry).map_err(|e| BenchError::Cell {
                period: spec.period.clone(),
                k: spec.k,
                setting: spec.flags(),
                model: spec.model.clone(),
                source: Box::new(e),
            });
            if let Err(e) = &result {
                log::warn!("{e}");
            }
            Cell {
                period: spec.period.clone(),
                k: spec.k,
                setting: spec.flags(),
                model: spec.model.clone(),
                result,
            }
        })
        .collect();
    Ok(MatrixOutcome { cells })
}
