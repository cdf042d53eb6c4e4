use std::collections::BTreeMap;
use std::sync::Arc;

use super::{alpha_chain, fit_linear, fit_mlp, fit_nam, fit_nam_monotonic, Model, ModelError, TrainConfig};
use crate::features::DatasetLayout;
use crate::matrix::Matrix;

/// Scaled training rows plus the layout they were built with.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub x: &'a Matrix,
    pub y: &'a [f64],
    pub layout: DatasetLayout,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MonotonicSummary {
    pub achieved_zero: bool,
    pub total_violation: f64,
    pub step_two_epochs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fitted {
    pub model: Model,
    /// Training objective per epoch; empty for closed-form fits.
    pub loss_curve: Vec<f64>,
    pub monotonic: Option<MonotonicSummary>,
}

pub trait Trainer: Send + Sync {
    fn fit(&self, data: &TrainData<'_>, config: &TrainConfig) -> Result<Fitted, ModelError>;
}

impl<F> Trainer for F
where
    F: Fn(&TrainData<'_>, &TrainConfig) -> Result<Fitted, ModelError> + Send + Sync,
{
    fn fit(&self, data: &TrainData<'_>, config: &TrainConfig) -> Result<Fitted, ModelError> {
        self(data, config)
    }
}

/// Trainers by name. Starts with `linear`, `mlp`, `nam` and `nam-monotonic`;
/// other model families plug in through [`ModelRegistry::register`].
#[derive(Clone)]
pub struct ModelRegistry {
    trainers: BTreeMap<String, Arc<dyn Trainer>>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        ModelRegistry::with_builtins()
    }
}

impl std::fmt::Debug for ModelRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.trainers.keys()).finish()
    }
}

fn linear(data: &TrainData<'_>, _config: &TrainConfig) -> Result<Fitted, ModelError> {
    Ok(Fitted {
        model: Model::Linear(fit_linear(data.x, data.y)?),
        loss_curve: Vec::new(),
        monotonic: None,
    })
}

fn mlp(data: &TrainData<'_>, config: &TrainConfig) -> Result<Fitted, ModelError> {
    let fit = fit_mlp(data.x, data.y, config)?;
    Ok(Fitted {
        model: Model::Mlp(fit.model),
        loss_curve: fit.loss_curve,
        monotonic: None,
    })
}

fn nam(data: &TrainData<'_>, config: &TrainConfig) -> Result<Fitted, ModelError> {
    let fit = fit_nam(data.x, data.y, config)?;
    Ok(Fitted {
        model: Model::Nam(fit.model),
        loss_curve: fit.loss_curve,
        monotonic: None,
    })
}

fn nam_monotonic(data: &TrainData<'_>, config: &TrainConfig) -> Result<Fitted, ModelError> {
    let fit = fit_nam_monotonic(data.x, data.y, config, &alpha_chain(&data.layout))?;
    let mut loss_curve = fit.unconstrained.loss_curve.clone();
    loss_curve.extend(fit.penalized_curve.iter().skip(1));
    Ok(Fitted {
        monotonic: Some(MonotonicSummary {
            achieved_zero: fit.achieved_zero,
            total_violation: fit.total_violation(),
            step_two_epochs: fit.step_two_epochs,
        }),
        model: Model::Nam(fit.model),
        loss_curve,
    })
}

impl ModelRegistry {
    pub fn empty() -> Self {
        ModelRegistry {
            trainers: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = ModelRegistry::empty();
        r.register("linear", linear);
        r.register("mlp", mlp);
        r.register("nam", nam);
        r.register("nam-monotonic", nam_monotonic);
        r
    }

    /// Adds or replaces the trainer under `name`.
    pub fn register(&mut self, name: &str, trainer: impl Trainer + 'static) {
        self.trainers.insert(name.to_owned(), Arc::new(trainer));
    }

    pub fn get(&self, name: &str) -> Option<&dyn Trainer> {
        self.trainers.get(name).map(|t| t.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.trainers.keys().map(String::as_str)
    }

    pub fn fit(&self, name: &str, data: &TrainData<'_>, config: &TrainConfig) -> Result<Fitted, ModelError> {
        self.get(name)
            .ok_or_else(|| ModelError::UnknownKind(name.to_owned()))?
            .fit(data, config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SentimentFlags;
    use crate::models::Regressor;

    #[derive(Debug)]
    struct Mean(f64, usize);

    impl Regressor for Mean {
        fn n_features(&self) -> usize {
            self.1
        }
        fn predict_row(&self, _x: &[f64]) -> f64 {
            self.0
        }
    }

    #[test]
    fn external_trainer_plugs_in() {
        let mut r = ModelRegistry::with_builtins();
        r.register("mean", |d: &TrainData<'_>, _: &TrainConfig| {
            Ok(Fitted {
                model: Model::External(Arc::new(Mean(d.y.iter().sum::<f64>() / d.y.len() as f64, d.x.cols()))),
                loss_curve: Vec::new(),
                monotonic: None,
            })
        });
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        let data = TrainData {
            x: &x,
            y: &[0.2, 0.4],
            layout: DatasetLayout {
                k: 1,
                flags: SentimentFlags::ONCHAIN_ONLY,
            },
        };
        let fit = r.fit("mean", &data, &TrainConfig::default()).unwrap();
        assert!((fit.model.predict(&x).unwrap()[1] - 0.3).abs() < 1e-12);
        assert!(r.fit("prophet", &data, &TrainConfig::default()).is_err());
        assert_eq!(
            r.names().collect::<Vec<_>>(),
            ["linear", "mean", "mlp", "nam", "nam-monotonic"]
        );
    }
}
