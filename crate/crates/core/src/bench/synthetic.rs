//! Seeded stand-ins for recorded periods: a block sequence produced by the
//! reactive rule on a synthetic demand path, plus scored chat messages whose
//! mood follows that demand.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::fee::{gen_synthetic_demand, simulate_reactive_on_demand, trajectory_blocks, DemandKind, MechanismParams};
use crate::ingest::{export_blocks, BlockSequence, FileFormat, Wei};
use crate::sentiment::{aggregate, export_series, Interval, SentimentScore, SentimentSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPeriodSpec {
    pub label: String,
    pub kind: DemandKind,
    pub seed: u64,
    pub blocks: usize,
    #[serde(default = "default_elasticity")]
    pub elasticity: f64,
    #[serde(default = "default_initial_fee")]
    pub initial_fee: Wei,
    /// Unix time of the first block.
    #[serde(default = "default_genesis")]
    pub genesis_timestamp: i64,
    #[serde(default = "default_first_block")]
    pub first_block: u64,
    /// Upper bound of messages per hour (at least one is always posted).
    #[serde(default = "default_messages")]
    pub max_messages_per_hour: usize,
}

fn default_elasticity() -> f64 {
    0.3
}
fn default_initial_fee() -> Wei {
    1_000_000_000
}
fn default_genesis() -> i64 {
    1_679_356_800
}
fn default_first_block() -> u64 {
    16_880_000
}
fn default_messages() -> usize {
    6
}

impl SyntheticPeriodSpec {
    pub fn new(label: impl Into<String>, kind: DemandKind, seed: u64, blocks: usize) -> Self {
        SyntheticPeriodSpec {
            label: label.into(),
            kind,
            seed,
            blocks,
            elasticity: default_elasticity(),
            initial_fee: default_initial_fee(),
            genesis_timestamp: default_genesis(),
            first_block: default_first_block(),
            max_messages_per_hour: default_messages(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPeriod {
    pub label: String,
    pub blocks: BlockSequence,
    /// Scored messages from one day before the first block to the last block.
    pub messages: Vec<(i64, SentimentScore)>,
}

impl SyntheticPeriod {
    pub fn hourly(&self) -> SentimentSeries {
        aggregate(&self.messages, Interval::Hour)
    }

    pub fn daily(&self) -> SentimentSeries {
        aggregate(&self.messages, Interval::Day)
    }
}

pub fn synthetic_period(spec: &SyntheticPeriodSpec, params: &MechanismParams) -> Result<SyntheticPeriod, BenchError> {
    let demand = gen_synthetic_demand(spec.kind, spec.seed, spec.blocks, spec.elasticity)?
        .with_origin(spec.first_block, spec.genesis_timestamp);
    let run = simulate_reactive_on_demand(&demand, params, spec.blocks, spec.initial_fee)?;
    let blocks = trajectory_blocks(&run, &demand)?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(7);
    let latent = demand.latent();
    let start = Interval::Day.chunk_start(spec.genesis_timestamp) - Interval::Day.seconds();
    let end = blocks.last().map_or(spec.genesis_timestamp, |b| b.timestamp);
    let mut messages = Vec::new();
    let mut hour = start;
    while hour <= end {
        // Mood tracks demand at the end of the hour, so chat hints at load
        // that is still to come.
        let ahead = ((hour + 3_600 - spec.genesis_timestamp) / 12).clamp(0, latent.len() as i64 - 1) as usize;
        let mood = latent[ahead];
        let count = rng.random_range(1..=spec.max_messages_per_hour.max(1));
        for _ in 0..count {
            let ts = hour + rng.random_range(0..3_600);
            let pos = (2.0 * mood).exp() * rng.random_range(0.2..1.0);
            let neg = (2.0 * (1.0 - mood)).exp() * rng.random_range(0.2..1.0);
            let neu = rng.random_range(0.5..3.0);
            let total = pos + neg + neu;
            messages.push((
                ts,
                SentimentScore::new(pos / total, neg / total, 1.0 - pos / total - neg / total)?,
            ));
        }
        hour += 3_600;
    }
    messages.sort_by_key(|m| m.0);
    Ok(SyntheticPeriod {
        label: spec.label.clone(),
        blocks,
        messages,
    })
}

/// Where [`write_period`] put a period's files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodFiles {
    pub blocks: PathBuf,
    pub hourly: PathBuf,
    pub daily: PathBuf,
}

/// Writes `<stem>_blocks.csv`, `<stem>_hourly.csv` and `<stem>_daily.csv`
/// into `dir`.
pub fn write_period(period: &SyntheticPeriod, dir: &Path, stem: &str) -> Result<PeriodFiles, BenchError> {
    let files = PeriodFiles {
        blocks: dir.join(format!("{stem}_blocks.csv")),
        hourly: dir.join(format!("{stem}_hourly.csv")),
        daily: dir.join(format!("{stem}_daily.csv")),
    };
    export_blocks(&period.blocks, &files.blocks, FileFormat::Csv)?;
    export_series(&period.hourly(), &files.hourly)?;
    export_series(&period.daily(), &files.daily)?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn period_is_seeded_and_covers_preceding_day() {
        let spec = SyntheticPeriodSpec::new("p", DemandKind::Spike, 3, 400);
        let params = MechanismParams::default();
        let a = synthetic_period(&spec, &params).unwrap();
        assert_eq!(a, synthetic_period(&spec, &params).unwrap());
        assert_eq!(a.blocks.len(), 400);
        let first = a.blocks.first().unwrap().timestamp;
        let daily = a.daily();
        assert!(daily.preceding(first).is_some());
        let hourly = a.hourly();
        assert!(a.blocks.iter().all(|b| hourly.preceding(b.timestamp).is_some()));
    }
}
