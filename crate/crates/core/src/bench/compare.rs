use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::fee::{
    shift_by_one_holds, simulate_proactive, simulate_reactive_on_demand, DemandModel, DemandSpec, FeeTrajectory,
    LoadForecaster, MechanismParams, PerfectForesight, Persistence, ZeroForecaster,
};
use crate::ingest::Wei;
use crate::models::{load_model, WindowForecaster};
use crate::sentiment::{import_series, Interval};

/// The forecaster driving the proactive run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PredictorSpec {
    /// Reads the demand path; the proactive run is then the reactive run one
    /// block early.
    PerfectForesight,
    /// Always forecasts an on-target block.
    Zero,
    /// Repeats the last realized load.
    Persistence,
    /// A saved model; sentiment series are needed when it was trained on them.
    Model {
        path: PathBuf,
        #[serde(default)]
        hourly: Option<PathBuf>,
        #[serde(default)]
        daily: Option<PathBuf>,
    },
}

impl PredictorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            PredictorSpec::PerfectForesight => "perfect-foresight",
            PredictorSpec::Zero => "zero",
            PredictorSpec::Persistence => "persistence",
            PredictorSpec::Model { .. } => "model",
        }
    }
}

impl std::str::FromStr for PredictorSpec {
    type Err = BenchError;

    /// `perfect-foresight`, `zero`, `persistence`, or a model file path.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "perfect-foresight" | "oracle" => PredictorSpec::PerfectForesight,
            "zero" => PredictorSpec::Zero,
            "persistence" => PredictorSpec::Persistence,
            "" => return Err(BenchError::Spec("empty predictor".into())),
            path => PredictorSpec::Model {
                path: path.into(),
                hourly: None,
                daily: None,
            },
        })
    }
}

/// How far one run's blocks stayed from the gas target, and what it charged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub mean_abs_load: f64,
    pub max_abs_load: f64,
    pub mean_fee: f64,
    pub min_fee: Wei,
    pub max_fee: Wei,
    pub final_fee: Wei,
}

impl TrajectorySummary {
    pub fn of(trajectory: &FeeTrajectory) -> TrajectorySummary {
        let loads = trajectory.loads();
        let fees = trajectory.fees();
        let n = loads.len().max(1) as f64;
        TrajectorySummary {
            mean_abs_load: loads.iter().map(|y| y.abs()).sum::<f64>() / n,
            max_abs_load: loads.iter().fold(0.0, |m, y| m.max(y.abs())),
            mean_fee: fees.iter().map(|&f| f as f64).sum::<f64>() / n,
            min_fee: fees.iter().copied().min().unwrap_or(0),
            max_fee: fees.iter().copied().max().unwrap_or(0),
            final_fee: fees.last().copied().unwrap_or(0),
        }
    }
}

fn default_initial_fee() -> Wei {
    1_000_000_000
}

fn default_predictor() -> PredictorSpec {
    PredictorSpec::PerfectForesight
}

/// Everything a simulation or comparison run needs, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub demand: DemandSpec,
    #[serde(default)]
    pub mechanism: MechanismParams,
    #[serde(default = "default_initial_fee")]
    pub initial_fee: Wei,
    /// Defaults to the demand horizon.
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default = "default_predictor")]
    pub predictor: PredictorSpec,
}

impl SimulationConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, BenchError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn horizon(&self) -> usize {
        self.horizon.unwrap_or(self.demand.horizon)
    }

    pub fn compare(&self) -> Result<Comparison, BenchError> {
        compare_mechanisms(
            &self.demand,
            &self.predictor,
            &self.mechanism,
            self.horizon(),
            self.initial_fee,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub predictor: String,
    pub horizon: usize,
    pub reactive: TrajectorySummary,
    pub proactive: TrajectorySummary,
    /// Whether the proactive run equals the reactive rule advanced one
    /// block; only checked for the perfect-foresight predictor.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub shift_by_one: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub report: ComparisonReport,
    pub demand: DemandModel,
    pub reactive: FeeTrajectory,
    pub proactive: FeeTrajectory,
}

/// Runs both rules on the same demand path from the same initial fee.
pub fn compare_mechanisms(
    demand: &DemandSpec,
    predictor: &PredictorSpec,
    params: &MechanismParams,
    horizon: usize,
    initial_fee: Wei,
) -> Result<Comparison, BenchError> {
    let demand = demand.build()?;
    compare_on(&demand, predictor, params, horizon, initial_fee)
}

/// As [`compare_mechanisms`] for an already built demand path.
pub fn compare_on(
    demand: &DemandModel,
    predictor: &PredictorSpec,
    params: &MechanismParams,
    horizon: usize,
    initial_fee: Wei,
) -> Result<Comparison, BenchError> {
    let reactive = simulate_reactive_on_demand(demand, params, horizon, initial_fee)?;
    let proactive = |f: &dyn LoadForecaster| simulate_proactive(demand, &f, params, horizon, initial_fee);
    let (proactive, shift_by_one) = match predictor {
        PredictorSpec::PerfectForesight => {
            let run = proactive(&PerfectForesight::new(demand, *params, initial_fee))?;
            let holds = shift_by_one_holds(&run, demand, params, initial_fee)?;
            (run, Some(holds))
        }
        PredictorSpec::Zero => (proactive(&ZeroForecaster)?, None),
        PredictorSpec::Persistence => (proactive(&Persistence { params: *params })?, None),
        PredictorSpec::Model { path, hourly, daily } => {
            let trained = load_model(path)?;
            let hourly = hourly.as_ref().map(|p| import_series(p, Interval::Hour)).transpose()?;
            let daily = daily.as_ref().map(|p| import_series(p, Interval::Day)).transpose()?;
            let forecaster = WindowForecaster::new(&trained, hourly.as_ref(), daily.as_ref())?;
            (proactive(&forecaster)?, None)
        }
    };
    Ok(Comparison {
        report: ComparisonReport {
            predictor: predictor.name().to_owned(),
            horizon,
            reactive: TrajectorySummary::of(&reactive),
            proactive: TrajectorySummary::of(&proactive),
            shift_by_one,
        },
        demand: demand.clone(),
        reactive,
        proactive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FEE: Wei = 1_000_000_000;

    fn spec(kind: &str, seed: u64, elasticity: f64) -> DemandSpec {
        DemandSpec {
            kind: kind.into(),
            seed,
            horizon: 200,
            elasticity,
            gas_limit: None,
            reference_fee: None,
        }
    }

    #[test]
    fn foresight_never_does_worse_on_elastic_paths() {
        let params = MechanismParams::default();
        for seed in 0..20 {
            let kind = ["sinusoidal", "autoregressive", "spike"][seed as usize % 3];
            let c = compare_mechanisms(
                &spec(kind, seed, 0.5),
                &PredictorSpec::PerfectForesight,
                &params,
                200,
                FEE,
            )
            .unwrap();
            assert_eq!(c.report.shift_by_one, Some(true));
            assert!(
                c.report.proactive.mean_abs_load <= c.report.reactive.mean_abs_load,
                "seed {seed}: {:?}",
                c.report
            );
        }
    }

    #[test]
    fn zero_predictor_on_target_demand_matches_reactive() {
        let params = MechanismParams::default();
        let demand = DemandModel::from_shares(vec![0.5; 50], 0.8).unwrap();
        let c = compare_on(&demand, &PredictorSpec::Zero, &params, 50, FEE).unwrap();
        assert_eq!(c.reactive.fees(), c.proactive.fees());
        assert_eq!(c.reactive.loads(), c.proactive.loads());
        assert_eq!(c.report.shift_by_one, None);
    }

    #[test]
    fn inelastic_demand_is_identical_across_modes() {
        let params = MechanismParams::default();
        let c = compare_mechanisms(
            &spec("spike", 4, 0.0),
            &PredictorSpec::PerfectForesight,
            &params,
            200,
            FEE,
        )
        .unwrap();
        assert_eq!(c.reactive.gas_used(), c.proactive.gas_used());
        assert_ne!(c.reactive.fees(), c.proactive.fees());
    }

    #[test]
    fn config_defaults() {
        let c: SimulationConfig =
            serde_json::from_str(r#"{"demand": {"kind": "ar", "seed": 1, "horizon": 30}}"#).unwrap();
        assert_eq!(c.horizon(), 30);
        assert_eq!(c.predictor, PredictorSpec::PerfectForesight);
        assert_eq!(c.compare().unwrap().report.shift_by_one, Some(true));
    }

    #[test]
    fn predictor_spec_parses() {
        assert_eq!("zero".parse::<PredictorSpec>().unwrap(), PredictorSpec::Zero);
        assert!(matches!(
            "m.txt".parse::<PredictorSpec>().unwrap(),
            PredictorSpec::Model { .. }
        ));
        let json: PredictorSpec = serde_json::from_str(r#"{"kind": "perfect-foresight"}"#).unwrap();
        assert_eq!(json, PredictorSpec::PerfectForesight);
    }
}
