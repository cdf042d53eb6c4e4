//! Supervised windows over block sequences.
//!
//! Each [`FeatureWindow`] carries `k` consecutive blocks' fullness ratios
//! (`alpha = gas_used / gas_limit`) and base fees (`beta`), oldest first,
//! optionally the averaged sentiment of the last completed hour and/or day,
//! and the normalized load of the *following* block as target. Nothing in a
//! window's features is later than its newest block.

mod io;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fee::{record_load, FeeError, MechanismParams};
use crate::ingest::{BlockRecord, BlockSequence, Wei};
use crate::matrix::Matrix;
use crate::sentiment::{Interval, SentimentScore, SentimentSeries};

pub use io::{export_dataset, import_dataset, sidecar_path};

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("window length k must be at least 1")]
    ZeroWindow,
    #[error("need at least {needed} blocks for k = {k}, got {got}")]
    TooShort { k: usize, needed: usize, got: usize },
    #[error("EMA coefficient {0} outside (0, 1]")]
    EmaCoefficient(f64),
    #[error("cannot smooth an empty series")]
    EmptySeries,
    #[error("{0} sentiment requested but the series is missing or empty")]
    MissingSentiment(Interval),
    #[error("expected a {expected} series, got {found}")]
    WrongInterval { expected: Interval, found: Interval },
    #[error("train fraction {0} outside (0, 1)")]
    TrainFraction(f64),
    #[error("split of {n} windows at fraction {fraction} leaves one side empty")]
    EmptySplit { n: usize, fraction: f64 },
    #[error("dataset layout mismatch: {0}")]
    Layout(String),
    #[error(transparent)]
    Fee(#[from] FeeError),
    #[error("{path}: {message}")]
    File { path: std::path::PathBuf, message: String },
}

/// Which sentiment columns a dataset carries. On-chain columns are always
/// present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SentimentFlags {
    #[serde(default)]
    pub use_hour_sentiment: bool,
    #[serde(default)]
    pub use_day_sentiment: bool,
}

impl SentimentFlags {
    pub const ONCHAIN_ONLY: SentimentFlags = SentimentFlags {
        use_hour_sentiment: false,
        use_day_sentiment: false,
    };

    /// The four settings in report-column order: `+DS+HS, +DS-HS, -DS+HS, -DS-HS`.
    pub const ALL: [SentimentFlags; 4] = [
        SentimentFlags {
            use_day_sentiment: true,
            use_hour_sentiment: true,
        },
        SentimentFlags {
            use_day_sentiment: true,
            use_hour_sentiment: false,
        },
        SentimentFlags {
            use_day_sentiment: false,
            use_hour_sentiment: true,
        },
        SentimentFlags {
            use_day_sentiment: false,
            use_hour_sentiment: false,
        },
    ];

    /// Position in [`SentimentFlags::ALL`].
    pub fn column(self) -> usize {
        match (self.use_day_sentiment, self.use_hour_sentiment) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        }
    }
}

impl fmt::Display for SentimentFlags {
    /// `+OC,+DS,-HS` style.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = |b: bool| if b { '+' } else { '-' };
        write!(
            f,
            "+OC,{}DS,{}HS",
            sign(self.use_day_sentiment),
            sign(self.use_hour_sentiment)
        )
    }
}

impl std::str::FromStr for SentimentFlags {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SentimentFlags::ALL
            .into_iter()
            .find(|f| f.to_string() == s.trim())
            .ok_or_else(|| FeatureError::Layout(format!("unknown setting `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureWindow {
    /// Oldest first; `alphas[k - 1]` is the most recent block.
    pub alphas: Vec<f64>,
    pub betas: Vec<Wei>,
    pub gamma_hour: Option<SentimentScore>,
    pub gamma_day: Option<SentimentScore>,
    pub target_y: f64,
    /// Block whose load is the target.
    pub target_block: u64,
    /// Timestamp of the newest feature block.
    pub last_timestamp: i64,
}

impl FeatureWindow {
    pub fn k(&self) -> usize {
        self.alphas.len()
    }
}

/// Column layout shared by all windows of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DatasetLayout {
    pub k: usize,
    pub flags: SentimentFlags,
}

impl DatasetLayout {
    pub fn n_features(&self) -> usize {
        2 * self.k + 3 * usize::from(self.flags.use_hour_sentiment) + 3 * usize::from(self.flags.use_day_sentiment)
    }

    /// Feature column of `alpha_{lag}` (1-based, 1 = oldest).
    pub fn alpha_column(&self, lag: usize) -> usize {
        assert!((1..=self.k).contains(&lag), "alpha lag {lag} out of 1..={}", self.k);
        lag - 1
    }

    pub fn is_alpha_column(&self, column: usize) -> bool {
        column < self.k
    }

    /// `alpha_1..alpha_k,beta_1..beta_k[,gh_pos,gh_neg,gh_neu][,gd_pos,gd_neg,gd_neu]`
    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.k).map(|i| format!("alpha_{i}")).collect();
        names.extend((1..=self.k).map(|i| format!("beta_{i}")));
        if self.flags.use_hour_sentiment {
            names.extend(["gh_pos", "gh_neg", "gh_neu"].map(String::from));
        }
        if self.flags.use_day_sentiment {
            names.extend(["gd_pos", "gd_neg", "gd_neu"].map(String::from));
        }
        names
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedDataset {
    windows: Vec<FeatureWindow>,
    layout: DatasetLayout,
}

impl AlignedDataset {
    /// Checks that every window matches `layout`.
    pub fn new(windows: Vec<FeatureWindow>, layout: DatasetLayout) -> Result<Self, FeatureError> {
        if layout.k == 0 {
            return Err(FeatureError::ZeroWindow);
        }
        for (i, w) in windows.iter().enumerate() {
            let bad = |what: &str| Err(FeatureError::Layout(format!("window {i}: {what}")));
            if w.alphas.len() != layout.k || w.betas.len() != layout.k {
                return bad("lag count differs from k");
            }
            if w.gamma_hour.is_some() != layout.flags.use_hour_sentiment
                || w.gamma_day.is_some() != layout.flags.use_day_sentiment
            {
                return bad("sentiment columns differ from flags");
            }
            if w.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) || !(-1.0..=1.0).contains(&w.target_y) {
                return bad("alpha or target out of range");
            }
        }
        for pair in windows.windows(2) {
            if pair[1].target_block <= pair[0].target_block {
                return Err(FeatureError::Layout("windows are not in chronological order".into()));
            }
        }
        Ok(AlignedDataset { windows, layout })
    }

    pub fn windows(&self) -> &[FeatureWindow] {
        &self.windows
    }

    pub fn layout(&self) -> DatasetLayout {
        self.layout
    }

    pub fn k(&self) -> usize {
        self.layout.k
    }

    pub fn flags(&self) -> SentimentFlags {
        self.layout.flags
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.target_y).collect()
    }
}

pub fn alpha(block: &BlockRecord) -> f64 {
    block.gas_used as f64 / block.gas_limit as f64
}

pub fn beta(block: &BlockRecord) -> Wei {
    block.base_fee
}

/// Window `i` holds blocks `i..i+k` as features and block `i+k`'s load as
/// target; `len(seq) - k` windows in all.
pub fn build_windows(seq: &BlockSequence, k: usize, params: &MechanismParams) -> Result<AlignedDataset, FeatureError> {
    if k == 0 {
        return Err(FeatureError::ZeroWindow);
    }
    let blocks = seq.records();
    if blocks.len() < k + 1 {
        return Err(FeatureError::TooShort {
            k,
            needed: k + 1,
            got: blocks.len(),
        });
    }
    let alphas: Vec<f64> = blocks.iter().map(alpha).collect();
    let mut windows = Vec::with_capacity(blocks.len() - k);
    for (i, lags) in blocks.windows(k + 1).enumerate() {
        let (features, target) = (&lags[..k], &lags[k]);
        windows.push(FeatureWindow {
            alphas: alphas[i..i + k].to_vec(),
            betas: features.iter().map(beta).collect(),
            gamma_hour: None,
            gamma_day: None,
            target_y: record_load(target, params)?,
            target_block: target.block_number,
            last_timestamp: features[k - 1].timestamp,
        });
    }
    Ok(AlignedDataset {
        windows,
        layout: DatasetLayout {
            k,
            flags: SentimentFlags::ONCHAIN_ONLY,
        },
    })
}

/// Recursive exponential smoothing, `s_t = s_{t-1} + C * (x_t - s_{t-1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmaSmoother {
    coefficient: f64,
    state: Option<f64>,
}

impl EmaSmoother {
    pub fn new(coefficient: f64) -> Result<Self, FeatureError> {
        if !(coefficient > 0.0 && coefficient <= 1.0) {
            return Err(FeatureError::EmaCoefficient(coefficient));
        }
        Ok(EmaSmoother {
            coefficient,
            state: None,
        })
    }

    pub fn update(&mut self, x: f64) -> f64 {
        let next = match self.state {
            None => x,
            Some(prev) => self.coefficient * (x - prev) + prev,
        };
        self.state = Some(next);
        next
    }

    pub fn state(&self) -> Option<f64> {
        self.state
    }
}

pub fn ema(series: &[f64], coefficient: f64) -> Result<Vec<f64>, FeatureError> {
    let mut smoother = EmaSmoother::new(coefficient)?;
    if series.is_empty() {
        return Err(FeatureError::EmptySeries);
    }
    Ok(series.iter().map(|&x| smoother.update(x)).collect())
}

/// Result of [`align_sentiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub dataset: AlignedDataset,
    /// Windows removed because their preceding chunk had no messages.
    pub dropped: usize,
}

fn required_series(
    series: Option<&SentimentSeries>,
    wanted: bool,
    interval: Interval,
) -> Result<Option<&SentimentSeries>, FeatureError> {
    if !wanted {
        return Ok(None);
    }
    match series {
        Some(s) if s.interval != interval => Err(FeatureError::WrongInterval {
            expected: interval,
            found: s.interval,
        }),
        Some(s) if !s.is_empty() => Ok(Some(s)),
        _ => Err(FeatureError::MissingSentiment(interval)),
    }
}

/// Attaches to each window the mean sentiment of the most recent *completed*
/// hour/day before its newest block. A block exactly on a chunk boundary
/// uses the chunk that just closed. Windows whose preceding chunk is absent
/// are dropped.
pub fn align_sentiment(
    dataset: &AlignedDataset,
    hourly: Option<&SentimentSeries>,
    daily: Option<&SentimentSeries>,
    flags: SentimentFlags,
) -> Result<Alignment, FeatureError> {
    let hourly = required_series(hourly, flags.use_hour_sentiment, Interval::Hour)?;
    let daily = required_series(daily, flags.use_day_sentiment, Interval::Day)?;

    let mut windows = Vec::with_capacity(dataset.len());
    let mut dropped = 0;
    for w in &dataset.windows {
        let gh = hourly.map(|s| s.preceding(w.last_timestamp).map(|b| b.mean));
        let gd = daily.map(|s| s.preceding(w.last_timestamp).map(|b| b.mean));
        if matches!(gh, Some(None)) || matches!(gd, Some(None)) {
            dropped += 1;
            continue;
        }
        windows.push(FeatureWindow {
            gamma_hour: gh.flatten(),
            gamma_day: gd.flatten(),
            ..w.clone()
        });
    }
    if dropped > 0 {
        log::info!("sentiment alignment dropped {dropped} of {} windows", dataset.len());
    }
    Ok(Alignment {
        dataset: AlignedDataset {
            windows,
            layout: DatasetLayout { k: dataset.k(), flags },
        },
        dropped,
    })
}

/// First `floor(n * fraction)` windows train, the rest test. No shuffling.
pub fn chronological_split(
    dataset: &AlignedDataset,
    train_fraction: f64,
) -> Result<(AlignedDataset, AlignedDataset), FeatureError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(FeatureError::TrainFraction(train_fraction));
    }
    let n = dataset.len();
    let cut = (n as f64 * train_fraction).floor() as usize;
    if cut == 0 || cut == n {
        return Err(FeatureError::EmptySplit {
            n,
            fraction: train_fraction,
        });
    }
    let part = |range: std::ops::Range<usize>| AlignedDataset {
        windows: dataset.windows[range].to_vec(),
        layout: dataset.layout,
    };
    Ok((part(0..cut), part(cut..n)))
}

/// Standardizes base fees with statistics from the training windows only.
/// All `beta` lags share one mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub beta_mean: f64,
    pub beta_std: f64,
}

impl FeatureScaler {
    pub const IDENTITY: FeatureScaler = FeatureScaler {
        beta_mean: 0.0,
        beta_std: 1.0,
    };

    pub fn fit(train: &AlignedDataset) -> FeatureScaler {
        let values: Vec<f64> = train
            .windows
            .iter()
            .flat_map(|w| w.betas.iter().map(|&b| b as f64))
            .collect();
        if values.is_empty() {
            return FeatureScaler::IDENTITY;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        FeatureScaler {
            beta_mean: mean,
            beta_std: if std > 0.0 && std.is_finite() { std } else { 1.0 },
        }
    }

    pub fn scale_beta(&self, beta: Wei) -> f64 {
        (beta as f64 - self.beta_mean) / self.beta_std
    }

    /// Feature row in [`DatasetLayout::feature_names`] order.
    pub fn row(&self, w: &FeatureWindow) -> Vec<f64> {
        let mut row = Vec::with_capacity(2 * w.k() + 6);
        row.extend_from_slice(&w.alphas);
        row.extend(w.betas.iter().map(|&b| self.scale_beta(b)));
        for gamma in [w.gamma_hour, w.gamma_day].into_iter().flatten() {
            row.extend_from_slice(&gamma.as_array());
        }
        row
    }

    pub fn design_matrix(&self, dataset: &AlignedDataset) -> (Matrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = dataset.windows.iter().map(|w| self.row(w)).collect();
        let x = if rows.is_empty() {
            Matrix::zeros(0, dataset.layout.n_features())
        } else {
            Matrix::from_rows(&rows)
        };
        (x, dataset.targets())
    }
}
