use rand::Rng;

use super::net::{self, Trace};
use super::train::{rng_for, run_sgd, Differentiable, Trained};
use super::{check_xy, ModelError, Regressor, TrainConfig};
use crate::matrix::Matrix;

/// Fully connected network, tanh hidden layers, linear scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    /// Input width, hidden widths, then 1.
    widths: Vec<usize>,
    params: Vec<f64>,
}

impl MlpModel {
    pub fn init<R: Rng>(n_features: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut widths = vec![n_features];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let mut params = vec![0.0; net::param_count(&widths)];
        net::init(&widths, &mut params, rng);
        MlpModel { widths, params }
    }

    /// Rebuilds a model from its layer widths (input through output) and
    /// flat parameters.
    pub fn from_parts(widths: Vec<usize>, params: Vec<f64>) -> Result<Self, ModelError> {
        if widths.len() < 2 || widths.contains(&0) || widths.last() != Some(&1) {
            return Err(ModelError::InvalidConfig(format!("bad MLP widths {widths:?}")));
        }
        if params.len() != net::param_count(&widths) {
            return Err(ModelError::InvalidConfig(format!(
                "MLP widths {widths:?} need {} parameters, got {}",
                net::param_count(&widths),
                params.len()
            )));
        }
        Ok(MlpModel { widths, params })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn hidden(&self) -> &[usize] {
        &self.widths[1..self.widths.len() - 1]
    }
}

impl Regressor for MlpModel {
    fn n_features(&self) -> usize {
        self.widths[0]
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        let mut trace = Trace::default();
        net::forward(&self.widths, &self.params, x, 1, &mut trace);
        trace.output()[0]
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>, ModelError> {
        super::check_features(self.n_features(), x)?;
        let mut trace = Trace::default();
        net::forward(&self.widths, &self.params, x.as_slice(), x.rows(), &mut trace);
        Ok(trace.output().to_vec())
    }
}

impl Differentiable for MlpModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn loss_grad(&self, x: &Matrix, y: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let mut trace = Trace::default();
        net::forward(&self.widths, &self.params, x.as_slice(), x.rows(), &mut trace);
        let n = y.len() as f64;
        let mut loss = 0.0;
        let delta: Vec<f64> = trace
            .output()
            .iter()
            .zip(y)
            .map(|(p, t)| {
                let e = p - t;
                loss += e * e;
                2.0 * e / n
            })
            .collect();
        net::backward(&self.widths, &self.params, &trace, &delta, x.rows(), grad);
        loss / n
    }

    fn loss(&self, x: &Matrix, y: &[f64]) -> f64 {
        let mut trace = Trace::default();
        net::forward(&self.widths, &self.params, x.as_slice(), x.rows(), &mut trace);
        trace
            .output()
            .iter()
            .zip(y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / y.len() as f64
    }
}

pub fn fit_mlp(x: &Matrix, y: &[f64], config: &TrainConfig) -> Result<Trained<MlpModel>, ModelError> {
    config.validate()?;
    check_xy(x, y)?;
    let mut rng = rng_for(config.seed, 0);
    let model = MlpModel::init(x.cols(), &config.hidden, &mut rng);
    run_sgd(model, x, y, config, &mut rng, config.epochs, None, &mut |_| false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::finite_diff_gradcheck;

    fn xor_data() -> (Matrix, Vec<f64>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                let (a, b) = (i as f64 / 7.0, j as f64 / 7.0);
                rows.push(vec![a, b]);
                y.push(a + b - 2.0 * a * b);
            }
        }
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn learns_xor_like_target() {
        let (x, y) = xor_data();
        let config = TrainConfig {
            hidden: vec![16, 16],
            learning_rate: 0.1,
            batch_size: 8,
            epochs: 3_000,
            ..Default::default()
        };
        let fit = fit_mlp(&x, &y, &config).unwrap();
        let final_mse = *fit.loss_curve.last().unwrap();
        assert!(final_mse < 0.01, "mse {final_mse}");
        for pair in fit.loss_curve.windows(2) {
            assert!(pair[1] <= pair[0] + crate::models::LOSS_TOLERANCE);
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (x, y) = xor_data();
        let config = TrainConfig {
            epochs: 0,
            hidden: vec![4],
            ..Default::default()
        };
        let fit = fit_mlp(&x, &y, &config).unwrap();
        let init = MlpModel::init(2, &[4], &mut rng_for(config.seed, 0));
        assert_eq!(fit.model, init);
    }

    #[test]
    fn deterministic_for_seed() {
        let (x, y) = xor_data();
        let config = TrainConfig {
            epochs: 5,
            hidden: vec![4],
            ..Default::default()
        };
        assert_eq!(fit_mlp(&x, &y, &config).unwrap(), fit_mlp(&x, &y, &config).unwrap());
    }

    #[test]
    fn diverging_step_names_epoch() {
        let (x, y) = xor_data();
        let y: Vec<f64> = y.iter().map(|v| v * 1e150).collect();
        let config = TrainConfig {
            learning_rate: 1e10,
            epochs: 3,
            hidden: vec![4],
            ..Default::default()
        };
        assert!(matches!(fit_mlp(&x, &y, &config), Err(ModelError::Divergence { .. })));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (x, y) = xor_data();
        let idx: Vec<usize> = (0..8).map(|i| i * 7).collect();
        let m = MlpModel::init(2, &[4], &mut rng_for(3, 0));
        let err = finite_diff_gradcheck(&m, &x.select_rows(&idx), &idx.iter().map(|&i| y[i]).collect::<Vec<_>>());
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn batch_predict_matches_rows() {
        let (x, _) = xor_data();
        let m = MlpModel::init(2, &[5, 3], &mut rng_for(1, 0));
        let batch = m.predict(&x).unwrap();
        for (row, p) in x.iter_rows().zip(batch) {
            assert_eq!(m.predict_row(row), p);
        }
    }
}
