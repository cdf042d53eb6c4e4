use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::train::Differentiable;
use super::{check_xy, ModelError, Regressor};
use crate::matrix::Matrix;

/// Added to the diagonal of the normal equations.
pub const RIDGE_JITTER: f64 = 1e-10;

/// `y = w . x + b`. Parameters are stored as `[w_1, .., w_p, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    params: Vec<f64>,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        let mut params = weights;
        params.push(bias);
        LinearModel { params }
    }

    pub(crate) fn random<R: Rng>(n_features: usize, rng: &mut R) -> Self {
        LinearModel {
            params: (0..=n_features).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.params[..self.params.len() - 1]
    }

    pub fn bias(&self) -> f64 {
        self.params[self.params.len() - 1]
    }
}

impl Regressor for LinearModel {
    fn n_features(&self) -> usize {
        self.params.len() - 1
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        let mut z = self.bias();
        for (w, v) in self.weights().iter().zip(x) {
            z += w * v;
        }
        z
    }
}

impl Differentiable for LinearModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn loss_grad(&self, x: &Matrix, y: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let n = y.len() as f64;
        let p = self.n_features();
        let mut loss = 0.0;
        for (row, t) in x.iter_rows().zip(y) {
            let e = self.predict_row(row) - t;
            loss += e * e;
            let d = 2.0 * e / n;
            for (g, v) in grad[..p].iter_mut().zip(row) {
                *g += d * v;
            }
            grad[p] += d;
        }
        loss / n
    }
}

/// Ordinary least squares through the normal equations, solved by Cholesky
/// after adding [`RIDGE_JITTER`] to the diagonal.
pub fn fit_linear(x: &Matrix, y: &[f64]) -> Result<LinearModel, ModelError> {
    check_xy(x, y)?;
    let p = x.cols() + 1;
    if x.rows() < p {
        return Err(ModelError::Underdetermined {
            rows: x.rows(),
            cols: x.cols(),
            needed: p,
        });
    }
    let design = DMatrix::from_fn(x.rows(), p, |i, j| if j < x.cols() { x.get(i, j) } else { 1.0 });
    let target = DVector::from_column_slice(y);
    let mut gram = design.transpose() * &design;
    for i in 0..p {
        gram[(i, i)] += RIDGE_JITTER;
    }
    let rhs = design.transpose() * target;
    let solution = gram.cholesky().ok_or(ModelError::Conditioning)?.solve(&rhs);
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::Conditioning);
    }
    Ok(LinearModel {
        params: solution.iter().copied().collect(),
    })
}
