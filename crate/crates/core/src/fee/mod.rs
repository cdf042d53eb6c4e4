//! EIP-1559 base-fee dynamics.
//!
//! The mechanism steers blocks towards a gas *target* (a fixed fraction of
//! the gas limit). A block's signed fullness is the normalized load
//!
//! ```text
//! y = (gas_used - gas_target) / gas_target        y in [-1, 1]
//! ```
//!
//! and the fee for the following block is
//!
//! ```text
//! next = max(min_base_fee, current + sign(y) * floor(current * |y| / max_change_denominator))
//! ```
//!
//! The *reactive* simulator feeds each block's realized `y` into the update
//! for the block after it. The *proactive* simulator instead asks a
//! [`LoadForecaster`] for the upcoming block's load and prices that block
//! with the forecast.

mod demand;
mod proactive;

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ingest::{BlockRecord, BlockSequence, Gas, IngestError, Wei};

pub use demand::{gen_synthetic_demand, DemandKind, DemandModel, DemandSpec};
pub use proactive::{
    shift_by_one_holds, simulate_proactive, simulate_reactive_on_demand, trajectory_blocks, LoadForecaster,
    PerfectForesight, Persistence, ZeroForecaster, BLOCK_INTERVAL_SECS,
};

/// Loads outside `[-1, 1]` by no more than this are treated as rounding noise
/// and clamped.
pub const LOAD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum FeeError {
    #[error("invalid mechanism parameters: {0}")]
    InvalidParams(String),
    #[error("gas limit {gas_limit} yields a zero gas target")]
    ZeroTarget { gas_limit: Gas },
    #[error("gas used {gas_used} outside [0, {max}] for target {gas_target}")]
    LoadDomain { gas_used: Gas, gas_target: Gas, max: u128 },
    #[error("load {0} outside [-1, 1]")]
    LoadOutOfRange(f64),
    #[error("base fee {fee} is below the floor {floor}")]
    FeeBelowFloor { fee: Wei, floor: Wei },
    #[error("block {block_number}: {source}")]
    AtBlock {
        block_number: u64,
        #[source]
        source: Box<FeeError>,
    },
    #[error("cannot simulate over an empty block sequence")]
    EmptySequence,
    #[error("horizon must be at least 1 and at most {available}, got {requested}")]
    Horizon { requested: usize, available: usize },
    #[error("unknown demand kind `{0}` (expected sinusoidal, autoregressive or spike)")]
    UnknownDemandKind(String),
    #[error("elasticity must be finite and non-negative, got {0}")]
    Elasticity(f64),
    #[error("predictor expects {expected} features, window layout provides {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("predictor failed: {0}")]
    Predictor(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl FeeError {
    fn at(self, block_number: u64) -> FeeError {
        FeeError::AtBlock {
            block_number,
            source: Box::new(self),
        }
    }
}

/// Share of the gas limit the mechanism aims for, as an exact ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetFraction {
    pub numerator: u64,
    pub denominator: u64,
}

impl TargetFraction {
    pub const HALF: TargetFraction = TargetFraction {
        numerator: 1,
        denominator: 2,
    };

    pub fn as_f64(self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

impl fmt::Display for TargetFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MechanismParams {
    pub target_fraction: TargetFraction,
    pub max_change_denominator: u64,
    pub min_base_fee: Wei,
}

impl Default for MechanismParams {
    fn default() -> Self {
        MechanismParams {
            target_fraction: TargetFraction::HALF,
            max_change_denominator: 8,
            min_base_fee: 7,
        }
    }
}

impl MechanismParams {
    pub fn validate(&self) -> Result<(), FeeError> {
        let TargetFraction { numerator, denominator } = self.target_fraction;
        if numerator == 0 || numerator >= denominator {
            return Err(FeeError::InvalidParams(format!(
                "target fraction {} must lie strictly between 0 and 1",
                self.target_fraction
            )));
        }
        if self.max_change_denominator == 0 {
            return Err(FeeError::InvalidParams("max_change_denominator must be >= 1".into()));
        }
        if self.min_base_fee == 0 {
            return Err(FeeError::InvalidParams("min_base_fee must be >= 1".into()));
        }
        Ok(())
    }
}

/// `floor(gas_limit * target_fraction)`; errors when that is zero.
pub fn gas_target(gas_limit: Gas, params: &MechanismParams) -> Result<Gas, FeeError> {
    params.validate()?;
    let TargetFraction { numerator, denominator } = params.target_fraction;
    let target = (gas_limit as u128 * numerator as u128 / denominator as u128) as Gas;
    if target == 0 {
        return Err(FeeError::ZeroTarget { gas_limit });
    }
    Ok(target)
}

/// `(gas_used - gas_target) / gas_target` for `gas_used` in `[0, 2 * gas_target]`.
pub fn normalized_load(gas_used: Gas, gas_target: Gas) -> Result<f64, FeeError> {
    let max = 2 * gas_target as u128;
    if gas_target == 0 || gas_used as u128 > max {
        return Err(FeeError::LoadDomain {
            gas_used,
            gas_target,
            max,
        });
    }
    let y = (gas_used as f64 - gas_target as f64) / gas_target as f64;
    Ok(y.clamp(-1.0, 1.0))
}

/// Normalized load of a block with the given limit.
///
/// Flooring the target can leave `2 * gas_target` a few gas short of the
/// exact `2 * gas_limit * target_fraction` (with the default fraction, an odd
/// gas limit loses one unit). Usage inside that rounding sliver saturates at
/// `y = 1`; usage beyond the exact bound is a domain error.
pub fn block_load(gas_used: Gas, gas_limit: Gas, params: &MechanismParams) -> Result<f64, FeeError> {
    let target = gas_target(gas_limit, params)?;
    if gas_used as u128 > 2 * target as u128 {
        let TargetFraction { numerator, denominator } = params.target_fraction;
        let exact_bound = gas_used as u128 * denominator as u128 <= 2 * gas_limit as u128 * numerator as u128;
        if exact_bound {
            return Ok(1.0);
        }
    }
    normalized_load(gas_used, target)
}

pub fn record_load(block: &BlockRecord, params: &MechanismParams) -> Result<f64, FeeError> {
    block_load(block.gas_used, block.gas_limit, params).map_err(|e| e.at(block.block_number))
}

fn check_load(y: f64) -> Result<f64, FeeError> {
    if !y.is_finite() || y.abs() > 1.0 + LOAD_TOLERANCE {
        return Err(FeeError::LoadOutOfRange(y));
    }
    Ok(y.clamp(-1.0, 1.0))
}

/// One step of the base-fee update. The change magnitude is floored, so an
/// increase and a decrease of the same load are symmetric and
/// `|next - current| <= current / max_change_denominator`.
pub fn next_base_fee(current: Wei, y: f64, params: &MechanismParams) -> Result<Wei, FeeError> {
    params.validate()?;
    let y = check_load(y)?;
    if current < params.min_base_fee {
        return Err(FeeError::FeeBelowFloor {
            fee: current,
            floor: params.min_base_fee,
        });
    }
    let bound = current / params.max_change_denominator;
    let scaled = (current as f64 * y.abs() / params.max_change_denominator as f64).floor();
    let delta = (scaled as Wei).min(bound);
    let next = if y >= 0.0 {
        current.saturating_add(delta)
    } else {
        current - delta
    };
    Ok(next.max(params.min_base_fee))
}

/// Fee and load of one block in a simulated or replayed run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeeStep {
    pub block_number: u64,
    /// Fee charged in this block.
    pub base_fee: Wei,
    /// Realized load of this block.
    pub normalized_load: f64,
    pub realized_gas_used: Gas,
    /// Forecast the proactive policy priced this block with.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub predicted_load: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeeTrajectory {
    pub steps: Vec<FeeStep>,
}

impl FeeTrajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn fees(&self) -> Vec<Wei> {
        self.steps.iter().map(|s| s.base_fee).collect()
    }

    pub fn loads(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.normalized_load).collect()
    }

    pub fn gas_used(&self) -> Vec<Gas> {
        self.steps.iter().map(|s| s.realized_gas_used).collect()
    }

    /// `block_number,base_fee,normalized_load,realized_gas_used`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FeeError> {
        let mut writer = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| FeeError::Io(e.into());
        writer
            .write_record(["block_number", "base_fee", "normalized_load", "realized_gas_used"])
            .map_err(csv_err)?;
        for s in &self.steps {
            writer
                .write_record([
                    s.block_number.to_string(),
                    s.base_fee.to_string(),
                    s.normalized_load.to_string(),
                    s.realized_gas_used.to_string(),
                ])
                .map_err(csv_err)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), FeeError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Replays the reactive rule over recorded blocks: block 0 pays
/// `initial_fee`, block `n + 1` pays `next_base_fee(fee_n, y_n)`.
pub fn simulate_reactive(
    seq: &BlockSequence,
    params: &MechanismParams,
    initial_fee: Wei,
) -> Result<FeeTrajectory, FeeError> {
    params.validate()?;
    if seq.is_empty() {
        return Err(FeeError::EmptySequence);
    }
    if initial_fee < params.min_base_fee {
        return Err(FeeError::FeeBelowFloor {
            fee: initial_fee,
            floor: params.min_base_fee,
        });
    }
    let mut fee = initial_fee;
    let mut steps = Vec::with_capacity(seq.len());
    for block in seq {
        let y = record_load(block, params)?;
        steps.push(FeeStep {
            block_number: block.block_number,
            base_fee: fee,
            normalized_load: y,
            realized_gas_used: block.gas_used,
            predicted_load: None,
        });
        fee = next_base_fee(fee, y, params).map_err(|e| e.at(block.block_number))?;
    }
    Ok(FeeTrajectory { steps })
}
