use rand::Rng;

use super::net::{self, Trace};
use super::train::{rng_for, run_sgd, Differentiable, Trained};
use super::{check_features, check_xy, ModelError, Regressor, TrainConfig};
use crate::matrix::Matrix;

/// Neural additive model: `f(x) = bias + sum_j g_j(x_j)`, one scalar-input
/// tanh subnetwork `g_j` per feature column.
///
/// Parameters are the subnetworks' flat parameter blocks in column order,
/// followed by the global bias.
#[derive(Debug, Clone, PartialEq)]
pub struct NamModel {
    n_features: usize,
    /// `[1, hidden.., 1]`, shared by every subnetwork.
    widths: Vec<usize>,
    params: Vec<f64>,
}

impl NamModel {
    pub fn init<R: Rng>(n_features: usize, hidden: &[usize], rng: &mut R) -> Self {
        let widths = subnet_widths(hidden);
        let per = net::param_count(&widths);
        let mut params = vec![0.0; per * n_features + 1];
        for j in 0..n_features {
            let block = &mut params[j * per..(j + 1) * per];
            net::init(&widths, block, rng);
        }
        NamModel {
            n_features,
            widths,
            params,
        }
    }

    pub fn from_parts(n_features: usize, hidden: &[usize], params: Vec<f64>) -> Result<Self, ModelError> {
        if hidden.contains(&0) {
            return Err(ModelError::InvalidConfig("NAM hidden widths must be positive".into()));
        }
        let widths = subnet_widths(hidden);
        let needed = net::param_count(&widths) * n_features + 1;
        if params.len() != needed {
            return Err(ModelError::InvalidConfig(format!(
                "NAM with {n_features} features and hidden {hidden:?} needs {needed} parameters, got {}",
                params.len()
            )));
        }
        Ok(NamModel {
            n_features,
            widths,
            params,
        })
    }

    pub fn hidden(&self) -> &[usize] {
        &self.widths[1..self.widths.len() - 1]
    }

    pub fn bias(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    fn per_subnet(&self) -> usize {
        net::param_count(&self.widths)
    }

    pub(crate) fn subnet_range(&self, j: usize) -> std::ops::Range<usize> {
        let per = self.per_subnet();
        j * per..(j + 1) * per
    }

    /// `g_j` evaluated at each of `inputs`.
    pub(crate) fn subnet_forward(&self, j: usize, inputs: &[f64], trace: &mut Trace) {
        net::forward(
            &self.widths,
            &self.params[self.subnet_range(j)],
            inputs,
            inputs.len(),
            trace,
        );
    }

    /// Accumulates into the full-model gradient `grad`.
    pub(crate) fn subnet_backward(&self, j: usize, trace: &Trace, out_delta: &[f64], grad: &mut [f64]) {
        let range = self.subnet_range(j);
        net::backward(
            &self.widths,
            &self.params[range.clone()],
            trace,
            out_delta,
            out_delta.len(),
            &mut grad[range],
        );
    }

    /// `g_j(value)`.
    pub fn contribution(&self, j: usize, value: f64) -> f64 {
        let mut trace = Trace::default();
        self.subnet_forward(j, &[value], &mut trace);
        trace.output()[0]
    }

    /// Per-feature contributions of one row; `predict_row` is the bias plus
    /// their sum, added left to right.
    pub fn contributions(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(j, &v)| self.contribution(j, v)).collect()
    }

    /// Contributions of every row, column by column (`out[j][row]`).
    fn column_traces(&self, x: &Matrix) -> Vec<Trace> {
        (0..self.n_features)
            .map(|j| {
                let mut trace = Trace::default();
                self.subnet_forward(j, &x.column(j), &mut trace);
                trace
            })
            .collect()
    }

    fn sum_contributions(&self, traces: &[Trace], rows: usize) -> Vec<f64> {
        let mut out = vec![self.bias(); rows];
        for t in traces {
            for (o, c) in out.iter_mut().zip(t.output()) {
                *o += c;
            }
        }
        out
    }
}

fn subnet_widths(hidden: &[usize]) -> Vec<usize> {
    let mut widths = vec![1];
    widths.extend_from_slice(hidden);
    widths.push(1);
    widths
}

impl Regressor for NamModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        let mut z = self.bias();
        for c in self.contributions(x) {
            z += c;
        }
        z
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>, ModelError> {
        check_features(self.n_features, x)?;
        Ok(self.sum_contributions(&self.column_traces(x), x.rows()))
    }
}

impl Differentiable for NamModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn loss_grad(&self, x: &Matrix, y: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let traces = self.column_traces(x);
        let pred = self.sum_contributions(&traces, x.rows());
        let n = y.len() as f64;
        let mut loss = 0.0;
        let delta: Vec<f64> = pred
            .iter()
            .zip(y)
            .map(|(p, t)| {
                let e = p - t;
                loss += e * e;
                2.0 * e / n
            })
            .collect();
        for (j, trace) in traces.iter().enumerate() {
            self.subnet_backward(j, trace, &delta, grad);
        }
        let last = grad.len() - 1;
        grad[last] = delta.iter().sum();
        loss / n
    }

    fn loss(&self, x: &Matrix, y: &[f64]) -> f64 {
        let pred = self.sum_contributions(&self.column_traces(x), x.rows());
        pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64
    }
}

pub fn fit_nam(x: &Matrix, y: &[f64], config: &TrainConfig) -> Result<Trained<NamModel>, ModelError> {
    config.validate()?;
    check_xy(x, y)?;
    let mut rng = rng_for(config.seed, 0);
    let model = NamModel::init(x.cols(), &config.hidden, &mut rng);
    run_sgd(model, x, y, config, &mut rng, config.epochs, None, &mut |_| false)
}
