use crate::features::{alpha, beta, DatasetLayout, FeatureScaler, FeatureWindow};
use crate::fee::{FeeError, LoadForecaster};
use crate::ingest::BlockRecord;
use crate::sentiment::SentimentSeries;

use super::{Model, Regressor};

/// A model together with everything needed to turn raw blocks into its
/// input rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: Model,
    pub layout: DatasetLayout,
    pub scaler: FeatureScaler,
}

impl TrainedModel {
    /// Prediction for one window, clamped to the load range `[-1, 1]`.
    pub fn predict_window(&self, window: &FeatureWindow) -> f64 {
        self.model.predict_row(&self.scaler.row(window)).clamp(-1.0, 1.0)
    }
}

/// Drives the proactive simulator with a trained model. Sentiment columns
/// come from the series given here, aligned exactly as during training.
#[derive(Debug, Clone)]
pub struct WindowForecaster<'a> {
    trained: &'a TrainedModel,
    hourly: Option<&'a SentimentSeries>,
    daily: Option<&'a SentimentSeries>,
}

impl<'a> WindowForecaster<'a> {
    pub fn new(
        trained: &'a TrainedModel,
        hourly: Option<&'a SentimentSeries>,
        daily: Option<&'a SentimentSeries>,
    ) -> Result<Self, FeeError> {
        let expected = trained.model.n_features();
        let found = trained.layout.n_features();
        if expected != found {
            return Err(FeeError::ShapeMismatch { expected, found });
        }
        let flags = trained.layout.flags;
        if flags.use_hour_sentiment && hourly.is_none() || flags.use_day_sentiment && daily.is_none() {
            return Err(FeeError::Predictor(format!(
                "model was trained with `{flags}` but the matching sentiment series is missing"
            )));
        }
        Ok(WindowForecaster {
            trained,
            hourly: hourly.filter(|_| flags.use_hour_sentiment),
            daily: daily.filter(|_| flags.use_day_sentiment),
        })
    }
}

impl LoadForecaster for WindowForecaster<'_> {
    fn forecast(&self, history: &[BlockRecord]) -> Result<Option<f64>, FeeError> {
        let k = self.trained.layout.k;
        if history.len() < k {
            return Ok(None);
        }
        let blocks = &history[history.len() - k..];
        let last = blocks[k - 1].timestamp;
        let gamma = |s: Option<&SentimentSeries>| s.map(|s| s.preceding(last).map(|b| b.mean));
        let (gamma_hour, gamma_day) = (gamma(self.hourly), gamma(self.daily));
        if matches!(gamma_hour, Some(None)) || matches!(gamma_day, Some(None)) {
            return Ok(None);
        }
        let window = FeatureWindow {
            alphas: blocks.iter().map(alpha).collect(),
            betas: blocks.iter().map(beta).collect(),
            gamma_hour: gamma_hour.flatten(),
            gamma_day: gamma_day.flatten(),
            target_y: 0.0,
            target_block: blocks[k - 1].block_number + 1,
            last_timestamp: last,
        };
        let y = self.trained.predict_window(&window);
        if !y.is_finite() {
            return Err(FeeError::Predictor(format!(
                "non-finite forecast after block {}",
                blocks[k - 1].block_number
            )));
        }
        Ok(Some(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SentimentFlags;
    use crate::fee::{simulate_proactive, DemandModel, MechanismParams};
    use crate::models::LinearModel;

    fn trained(n_weights: usize) -> TrainedModel {
        TrainedModel {
            model: Model::Linear(LinearModel::new(vec![0.0; n_weights], 0.25)),
            layout: DatasetLayout {
                k: 2,
                flags: SentimentFlags::ONCHAIN_ONLY,
            },
            scaler: FeatureScaler::IDENTITY,
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let t = trained(5);
        assert!(matches!(
            WindowForecaster::new(&t, None, None),
            Err(FeeError::ShapeMismatch { expected: 5, found: 4 })
        ));
    }

    #[test]
    fn holds_fee_until_k_blocks_then_forecasts() {
        let t = trained(4);
        let f = WindowForecaster::new(&t, None, None).unwrap();
        let demand = DemandModel::from_shares(vec![0.5; 6], 0.0).unwrap();
        let traj = simulate_proactive(&demand, &f, &MechanismParams::default(), 6, 1_000_000_000).unwrap();
        let predicted: Vec<_> = traj.steps.iter().map(|s| s.predicted_load).collect();
        assert_eq!(predicted[..2], [None, None]);
        assert!(predicted[2..].iter().all(|p| *p == Some(0.25)));
    }
}
