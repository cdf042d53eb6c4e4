use super::{
    block_load, next_base_fee, simulate_reactive, DemandModel, FeeError, FeeStep, FeeTrajectory, MechanismParams,
};
use crate::ingest::{BlockRecord, BlockSequence, Wei};

/// Seconds between simulated blocks.
pub const BLOCK_INTERVAL_SECS: i64 = 12;

/// Predicts the normalized load of the block that comes right after
/// `history`.
///
/// `Ok(None)` means the forecaster cannot speak yet (too little history); the
/// proactive simulator then holds the fee for that block.
pub trait LoadForecaster {
    fn forecast(&self, history: &[BlockRecord]) -> Result<Option<f64>, FeeError>;
}

impl<F: LoadForecaster + ?Sized> LoadForecaster for &F {
    fn forecast(&self, history: &[BlockRecord]) -> Result<Option<f64>, FeeError> {
        (**self).forecast(history)
    }
}

impl<F: LoadForecaster + ?Sized> LoadForecaster for Box<F> {
    fn forecast(&self, history: &[BlockRecord]) -> Result<Option<f64>, FeeError> {
        (**self).forecast(history)
    }
}

/// Always predicts an on-target block.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroForecaster;

impl LoadForecaster for ZeroForecaster {
    fn forecast(&self, _history: &[BlockRecord]) -> Result<Option<f64>, FeeError> {
        Ok(Some(0.0))
    }
}

/// Predicts that the next block repeats the last realized load. Driving the
/// proactive rule with it reproduces the reactive rule.
#[derive(Debug, Clone, Copy)]
pub struct Persistence {
    pub params: MechanismParams,
}

impl LoadForecaster for Persistence {
    fn forecast(&self, history: &[BlockRecord]) -> Result<Option<f64>, FeeError> {
        match history.last() {
            None => Ok(Some(0.0)),
            Some(b) => super::record_load(b, &self.params).map(Some),
        }
    }
}

/// Reads the demand path directly: knows exactly what the next block will
/// use given the fee users were last quoted.
pub struct PerfectForesight<'a> {
    demand: &'a DemandModel,
    params: MechanismParams,
    initial_fee: Wei,
}

impl<'a> PerfectForesight<'a> {
    pub fn new(demand: &'a DemandModel, params: MechanismParams, initial_fee: Wei) -> Self {
        PerfectForesight {
            demand,
            params,
            initial_fee,
        }
    }
}

impl LoadForecaster for PerfectForesight<'_> {
    fn forecast(&self, history: &[BlockRecord]) -> Result<Option<f64>, FeeError> {
        let n = history.len();
        if n >= self.demand.horizon() {
            return Ok(None);
        }
        let quoted = history.last().map_or(self.initial_fee, |b| b.base_fee);
        let used = self.demand.gas_used(n, quoted);
        block_load(used, self.demand.gas_limit, &self.params).map(Some)
    }
}

fn check_horizon(horizon: usize, demand: &DemandModel) -> Result<(), FeeError> {
    if horizon == 0 || horizon > demand.horizon() {
        return Err(FeeError::Horizon {
            requested: horizon,
            available: demand.horizon(),
        });
    }
    Ok(())
}

fn block_at(demand: &DemandModel, n: usize, gas_used: u64, fee: Wei) -> BlockRecord {
    BlockRecord {
        timestamp: demand.genesis_timestamp + BLOCK_INTERVAL_SECS * n as i64,
        block_number: demand.first_block + n as u64,
        gas_limit: demand.gas_limit,
        gas_used,
        base_fee: fee,
    }
}

/// The blocks a simulated run produced on `demand`'s timeline: 12-second
/// spacing from the demand's genesis, realized gas and charged fee.
pub fn trajectory_blocks(trajectory: &FeeTrajectory, demand: &DemandModel) -> Result<BlockSequence, FeeError> {
    let blocks = trajectory
        .steps
        .iter()
        .enumerate()
        .map(|(n, s)| block_at(demand, n, s.realized_gas_used, s.base_fee))
        .collect();
    Ok(BlockSequence::new(blocks)?)
}

/// Reactive rule in closed loop with a demand model: the fee for block `n`
/// comes from block `n - 1`'s realized load, and block `n`'s demand responds
/// to the fee quoted for block `n - 1`.
pub fn simulate_reactive_on_demand(
    demand: &DemandModel,
    params: &MechanismParams,
    horizon: usize,
    initial_fee: Wei,
) -> Result<FeeTrajectory, FeeError> {
    params.validate()?;
    check_horizon(horizon, demand)?;
    let mut quoted = initial_fee;
    let mut fee = initial_fee;
    let mut steps = Vec::with_capacity(horizon);
    for n in 0..horizon {
        let used = demand.gas_used(n, quoted);
        let y = block_load(used, demand.gas_limit, params)?;
        steps.push(FeeStep {
            block_number: demand.first_block + n as u64,
            base_fee: fee,
            normalized_load: y,
            realized_gas_used: used,
            predicted_load: None,
        });
        quoted = fee;
        fee = next_base_fee(fee, y, params)?;
    }
    Ok(FeeTrajectory { steps })
}

/// Proactive rule: block `n` is priced with the forecast of its own load,
/// `fee_n = next_base_fee(fee_{n-1}, forecast_n)`, with `fee_{-1} = initial_fee`.
/// Demand for block `n` then responds to `fee_{n-1}`, exactly as in
/// [`simulate_reactive_on_demand`], and the realized load is logged next to
/// the forecast.
pub fn simulate_proactive<F: LoadForecaster>(
    demand: &DemandModel,
    predictor: &F,
    params: &MechanismParams,
    horizon: usize,
    initial_fee: Wei,
) -> Result<FeeTrajectory, FeeError> {
    params.validate()?;
    check_horizon(horizon, demand)?;
    if initial_fee < params.min_base_fee {
        return Err(FeeError::FeeBelowFloor {
            fee: initial_fee,
            floor: params.min_base_fee,
        });
    }
    let mut history: Vec<BlockRecord> = Vec::with_capacity(horizon);
    let mut steps = Vec::with_capacity(horizon);
    let mut previous_fee = initial_fee;
    for n in 0..horizon {
        let forecast = predictor.forecast(&history)?;
        let fee = next_base_fee(previous_fee, forecast.unwrap_or(0.0), params)
            .map_err(|e| e.at(demand.first_block + n as u64))?;
        let used = demand.gas_used(n, previous_fee);
        let y = block_load(used, demand.gas_limit, params)?;
        if let Some(p) = forecast {
            if p.signum() != y.signum() && p != 0.0 && y != 0.0 {
                log::trace!("block {n}: forecast {p:.4} and realized {y:.4} disagree in sign");
            }
        }
        steps.push(FeeStep {
            block_number: demand.first_block + n as u64,
            base_fee: fee,
            normalized_load: y,
            realized_gas_used: used,
            predicted_load: forecast,
        });
        history.push(block_at(demand, n, used, fee));
        previous_fee = fee;
    }
    Ok(FeeTrajectory { steps })
}

/// Checks that `proactive` equals the reactive rule advanced one block:
/// replaying the reactive rule over the blocks the proactive run produced
/// (same realized gas) must give `reactive[n + 1].base_fee == proactive[n].base_fee`.
pub fn shift_by_one_holds(
    proactive: &FeeTrajectory,
    demand: &DemandModel,
    params: &MechanismParams,
    initial_fee: Wei,
) -> Result<bool, FeeError> {
    let reactive = simulate_reactive(&trajectory_blocks(proactive, demand)?, params, initial_fee)?;
    let shifted = proactive.steps.iter().zip(reactive.steps.iter().skip(1));
    Ok(shifted.clone().all(|(p, r)| p.base_fee == r.base_fee)
        && proactive
            .steps
            .iter()
            .zip(&reactive.steps)
            .all(|(p, r)| p.normalized_load.to_bits() == r.normalized_load.to_bits()))
}
