//! Hand-written regressors trained by mini-batch gradient descent: ordinary
//! least squares, a tanh MLP, and a neural additive model (NAM) with an
//! optional pairwise monotonicity penalty.
//!
//! All arithmetic is `f64` and every trainer is a pure function of its data
//! and [`TrainConfig::seed`].

mod forecaster;
mod linear;
mod mlp;
mod monotonic;
mod nam;
pub(crate) mod net;
mod registry;
mod text;
mod train;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

pub use forecaster::{TrainedModel, WindowForecaster};
pub use linear::{fit_linear, LinearModel, RIDGE_JITTER};
pub use mlp::{fit_mlp, MlpModel};
pub use monotonic::{
    alpha_chain, audit, fit_nam_monotonic, monotonic_violation, write_audit_csv, AuditContexts, AuditRow, MonotonicFit,
    MonotonicityConstraint, AUDIT_HEADER,
};
pub use nam::{fit_nam, NamModel};
pub use registry::{Fitted, ModelRegistry, MonotonicSummary, TrainData, Trainer};
pub use text::{load_model, read_model, save_model, write_model};
pub use train::{finite_diff_gradcheck, gradcheck_kind, Differentiable, Trained, LOSS_TOLERANCE};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("model expects {expected} features, input has {found}")]
    Shape { expected: usize, found: usize },
    #[error("{rows} rows and {len} targets")]
    LengthMismatch { rows: usize, len: usize },
    #[error("need at least {needed} rows to fit {cols} columns, got {rows}")]
    Underdetermined { rows: usize, cols: usize, needed: usize },
    #[error("normal equations are singular even with ridge jitter")]
    Conditioning,
    #[error("training diverged (non-finite loss) in epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("empty input")]
    EmptyInput,
    #[error("invalid monotonicity constraint: {0}")]
    Constraint(String),
    #[error("unknown model kind `{0}`")]
    UnknownKind(String),
    #[error("model file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Training hyperparameters shared by all gradient-trained models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Epochs for plain training, and the epoch budget of the penalized step.
    pub epochs: usize,
    pub seed: u64,
    pub batch_size: usize,
    /// Hidden widths of the MLP and of every NAM subnetwork.
    pub hidden: Vec<usize>,
    /// Penalty weight of the monotonicity term.
    pub lambda: f64,
    /// Audit grid points on `[0, 1]`.
    pub grid_points: usize,
    /// Perturbation applied to the audited coordinates.
    pub step: f64,
    /// Contexts drawn from the training rows per grid point.
    pub contexts: usize,
    /// The penalized step asks for `|d_new| >= |d_old| + margin`, so the
    /// audit's plain inequality holds with room for rounding.
    pub margin: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 200,
            seed: 0,
            batch_size: 16,
            hidden: vec![32, 32],
            lambda: 1.0,
            grid_points: 101,
            step: 0.01,
            contexts: 64,
            margin: 1e-5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_owned()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-negative");
        }
        if self.grid_points < 2 {
            return bad("grid needs at least 2 points");
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad("perturbation step must be positive");
        }
        if self.contexts == 0 {
            return bad("audit needs at least one context");
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return bad("margin must be non-negative");
        }
        Ok(())
    }
}

/// A fitted function from feature rows to a scalar.
pub trait Regressor: Send + Sync + fmt::Debug {
    fn n_features(&self) -> usize;

    /// Caller guarantees `x.len() == n_features()`.
    fn predict_row(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>, ModelError> {
        check_features(self.n_features(), x)?;
        Ok(x.iter_rows().map(|r| self.predict_row(r)).collect())
    }
}

pub(crate) fn check_features(expected: usize, x: &Matrix) -> Result<(), ModelError> {
    if x.cols() != expected {
        return Err(ModelError::Shape {
            expected,
            found: x.cols(),
        });
    }
    Ok(())
}

pub(crate) fn check_xy(x: &Matrix, y: &[f64]) -> Result<(), ModelError> {
    if x.rows() != y.len() {
        return Err(ModelError::LengthMismatch {
            rows: x.rows(),
            len: y.len(),
        });
    }
    if y.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Linear,
    Mlp,
    Nam,
    /// NAM followed by the penalized step over the full α constraint chain.
    NamMonotonic,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Mlp => "mlp",
            ModelKind::Nam => "nam",
            ModelKind::NamMonotonic => "nam-monotonic",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            ModelKind::Linear,
            ModelKind::Mlp,
            ModelKind::Nam,
            ModelKind::NamMonotonic,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| ModelError::UnknownKind(s.to_owned()))
    }
}

/// A trained model: one of the built-in kinds, or one produced by a trainer
/// registered from outside the crate.
#[derive(Debug, Clone)]
pub enum Model {
    Linear(LinearModel),
    Mlp(MlpModel),
    Nam(NamModel),
    External(Arc<dyn Regressor>),
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Model::Linear(a), Model::Linear(b)) => a == b,
            (Model::Mlp(a), Model::Mlp(b)) => a == b,
            (Model::Nam(a), Model::Nam(b)) => a == b,
            (Model::External(a), Model::External(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl Model {
    pub fn as_nam(&self) -> Option<&NamModel> {
        match self {
            Model::Nam(m) => Some(m),
            _ => None,
        }
    }
}

impl Regressor for Model {
    fn n_features(&self) -> usize {
        match self {
            Model::Linear(m) => m.n_features(),
            Model::Mlp(m) => m.n_features(),
            Model::Nam(m) => m.n_features(),
            Model::External(m) => m.n_features(),
        }
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            Model::Linear(m) => m.predict_row(x),
            Model::Mlp(m) => m.predict_row(x),
            Model::Nam(m) => m.predict_row(x),
            Model::External(m) => m.predict_row(x),
        }
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>, ModelError> {
        match self {
            Model::Linear(m) => m.predict(x),
            Model::Mlp(m) => m.predict(x),
            Model::Nam(m) => m.predict(x),
            Model::External(m) => m.predict(x),
        }
    }
}

pub fn predict(model: &dyn Regressor, x: &Matrix) -> Result<Vec<f64>, ModelError> {
    model.predict(x)
}

/// Mean of squared residuals.
pub fn mse(predicted: &[f64], actual: &[f64]) -> Result<f64, ModelError> {
    if predicted.len() != actual.len() {
        return Err(ModelError::LengthMismatch {
            rows: predicted.len(),
            len: actual.len(),
        });
    }
    if actual.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    let sum: f64 = predicted.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok(sum / actual.len() as f64)
}

/// Population variance.
pub fn variance(values: &[f64]) -> Result<f64, ModelError> {
    if values.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_examples() {
        let y = [0.1, -0.4, 0.9];
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        let shifted: Vec<f64> = y.iter().map(|v| v + 1.0).collect();
        assert!((mse(&shifted, &y).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(variance(&[0.3; 5]).unwrap(), 0.0);
        assert_eq!(variance(&[1.0, 3.0]).unwrap(), 1.0);
        assert!(mse(&[], &[]).is_err());
        assert!(variance(&[]).is_err());
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for broken in [
            TrainConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
            TrainConfig {
                grid_points: 1,
                ..Default::default()
            },
            TrainConfig {
                step: 0.0,
                ..Default::default()
            },
            TrainConfig {
                lambda: -1.0,
                ..Default::default()
            },
        ] {
            assert!(broken.validate().is_err());
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in [
            ModelKind::Linear,
            ModelKind::Mlp,
            ModelKind::Nam,
            ModelKind::NamMonotonic,
        ] {
            assert_eq!(k.to_string().parse::<ModelKind>().unwrap(), k);
        }
        assert!("xgboost".parse::<ModelKind>().is_err());
    }
}
