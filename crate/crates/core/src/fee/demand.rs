use std::f64::consts::TAU;
use std::ops::Range;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::FeeError;
use crate::ingest::{Gas, Wei};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandKind {
    /// Smooth daily-cycle-like swings around the target.
    Sinusoidal,
    /// Mean-reverting AR(1) fullness around the target.
    Autoregressive,
    /// Quiet baseline with a burst of near-full blocks, airdrop style.
    Spike,
}

impl FromStr for DemandKind {
    type Err = FeeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sinusoidal" | "sine" => Ok(DemandKind::Sinusoidal),
            "autoregressive" | "ar" => Ok(DemandKind::Autoregressive),
            "spike" => Ok(DemandKind::Spike),
            _ => Err(FeeError::UnknownDemandKind(s.to_owned())),
        }
    }
}

/// A seeded synthetic demand path.
///
/// `latent[n]` is the share of the gas limit block `n` would use at the
/// reference fee. Users respond to the fee quoted when they submit, which is
/// the fee of the preceding block:
///
/// ```text
/// gas_used(n, quoted) = round(clamp(latent[n] * (reference_fee / quoted)^elasticity, 0, 1) * gas_limit)
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    pub kind: DemandKind,
    pub seed: u64,
    pub elasticity: f64,
    pub gas_limit: Gas,
    pub reference_fee: Wei,
    pub first_block: u64,
    pub genesis_timestamp: i64,
    latent: Vec<f64>,
    spike_window: Option<Range<usize>>,
}

impl DemandModel {
    /// A demand path from explicit per-block shares of the gas limit, e.g.
    /// the realized `gas_used / gas_limit` of a recorded period.
    pub fn from_shares(shares: Vec<f64>, elasticity: f64) -> Result<Self, FeeError> {
        if shares.is_empty() {
            return Err(FeeError::Horizon {
                requested: 0,
                available: usize::MAX,
            });
        }
        if !elasticity.is_finite() || elasticity < 0.0 {
            return Err(FeeError::Elasticity(elasticity));
        }
        Ok(DemandModel {
            kind: DemandKind::Autoregressive,
            seed: 0,
            elasticity,
            gas_limit: 30_000_000,
            reference_fee: 1_000_000_000,
            first_block: 0,
            genesis_timestamp: 1_679_356_800,
            latent: shares.into_iter().map(|x| x.clamp(0.0, 1.0)).collect(),
            spike_window: None,
        })
    }

    pub fn horizon(&self) -> usize {
        self.latent.len()
    }

    pub fn latent(&self) -> &[f64] {
        &self.latent
    }

    /// Block indices of the burst for [`DemandKind::Spike`].
    pub fn spike_window(&self) -> Option<Range<usize>> {
        self.spike_window.clone()
    }

    pub fn gas_used(&self, n: usize, quoted_fee: Wei) -> Gas {
        let share = if self.elasticity == 0.0 {
            self.latent[n]
        } else {
            let ratio = self.reference_fee as f64 / quoted_fee.max(1) as f64;
            self.latent[n] * ratio.powf(self.elasticity)
        };
        (share.clamp(0.0, 1.0) * self.gas_limit as f64).round() as Gas
    }

    pub fn with_gas_limit(mut self, gas_limit: Gas) -> Self {
        self.gas_limit = gas_limit;
        self
    }

    pub fn with_reference_fee(mut self, fee: Wei) -> Self {
        self.reference_fee = fee;
        self
    }

    pub fn with_origin(mut self, first_block: u64, genesis_timestamp: i64) -> Self {
        self.first_block = first_block;
        self.genesis_timestamp = genesis_timestamp;
        self
    }
}

/// Builds a demand path; deterministic in `(kind, seed, horizon)`.
pub fn gen_synthetic_demand(
    kind: DemandKind,
    seed: u64,
    horizon: usize,
    elasticity: f64,
) -> Result<DemandModel, FeeError> {
    if horizon == 0 {
        return Err(FeeError::Horizon {
            requested: 0,
            available: usize::MAX,
        });
    }
    if !elasticity.is_finite() || elasticity < 0.0 {
        return Err(FeeError::Elasticity(elasticity));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spike_window = None;
    let latent: Vec<f64> = match kind {
        DemandKind::Sinusoidal => {
            let noise = Normal::new(0.0, 0.05).unwrap();
            let phase = rng.random_range(0.0..TAU);
            let period = 50.0;
            (0..horizon)
                .map(|n| 0.5 + 0.3 * (TAU * n as f64 / period + phase).sin() + noise.sample(&mut rng))
                .collect()
        }
        DemandKind::Autoregressive => {
            let noise = Normal::new(0.0, 0.08).unwrap();
            let mut x: f64 = 0.5;
            (0..horizon)
                .map(|_| {
                    x = 0.5 + 0.8 * (x - 0.5) + noise.sample(&mut rng);
                    x = x.clamp(0.0, 1.0);
                    x
                })
                .collect()
        }
        DemandKind::Spike => {
            let noise = Normal::new(0.0, 0.05).unwrap();
            let start = horizon / 3;
            let len = (horizon / 10).max(1);
            let window = start..(start + len).min(horizon);
            let path = (0..horizon)
                .map(|n| {
                    let base = 0.5 + noise.sample(&mut rng);
                    if window.contains(&n) {
                        0.97 + 0.03 * rng.random::<f64>()
                    } else {
                        base
                    }
                })
                .collect();
            spike_window = Some(window);
            path
        }
    };
    Ok(DemandModel {
        kind,
        seed,
        elasticity,
        gas_limit: 30_000_000,
        reference_fee: 1_000_000_000,
        first_block: 0,
        genesis_timestamp: 1_679_356_800,
        latent: latent.into_iter().map(|x| x.clamp(0.0, 1.0)).collect(),
        spike_window,
    })
}

/// Serializable recipe for a [`DemandModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    pub kind: String,
    pub seed: u64,
    pub horizon: usize,
    #[serde(default)]
    pub elasticity: f64,
    #[serde(default)]
    pub gas_limit: Option<Gas>,
    #[serde(default)]
    pub reference_fee: Option<Wei>,
}

impl DemandSpec {
    pub fn build(&self) -> Result<DemandModel, FeeError> {
        let mut model = gen_synthetic_demand(self.kind.parse()?, self.seed, self.horizon, self.elasticity)?;
        if let Some(limit) = self.gas_limit {
            model = model.with_gas_limit(limit);
        }
        if let Some(fee) = self.reference_fee {
            model = model.with_reference_fee(fee);
        }
        Ok(model)
    }
}
