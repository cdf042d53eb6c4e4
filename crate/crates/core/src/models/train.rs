use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_xy, LinearModel, MlpModel, ModelError, ModelKind, NamModel, Regressor, TrainConfig};
use crate::matrix::Matrix;

/// Largest rise of the per-epoch training objective the trainer accepts.
/// An epoch that raises it further is rolled back and the step size halved.
pub const LOSS_TOLERANCE: f64 = 1e-6;

/// Consecutive rolled-back epochs before the step size is halved.
const MAX_REJECTED: usize = 3;

const GRADCHECK_STEP: f64 = 1e-5;

/// A model whose parameters form one flat vector with an analytic MSE
/// gradient.
pub trait Differentiable: Regressor + Clone {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    /// Mean squared error over `(x, y)`; `grad` is overwritten with its
    /// gradient.
    fn loss_grad(&self, x: &Matrix, y: &[f64], grad: &mut [f64]) -> f64;

    fn loss(&self, x: &Matrix, y: &[f64]) -> f64 {
        let sum: f64 = x
            .iter_rows()
            .zip(y)
            .map(|(r, t)| {
                let e = self.predict_row(r) - t;
                e * e
            })
            .sum();
        sum / y.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained<M> {
    pub model: M,
    /// Training objective before the first epoch and after each epoch.
    pub loss_curve: Vec<f64>,
    pub epochs_run: usize,
}

/// Extra differentiable term added to the MSE; returns its value and
/// accumulates its gradient into the slice.
pub(crate) type Penalty<'a, M> = &'a dyn Fn(&M, &mut [f64]) -> f64;

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn objective<M: Differentiable>(model: &M, x: &Matrix, y: &[f64], penalty: Option<(f64, Penalty<'_, M>)>) -> f64 {
    let mut value = model.loss(x, y);
    if let Some((lambda, p)) = penalty {
        let mut scratch = vec![0.0; model.params().len()];
        value += lambda * p(model, &mut scratch);
    }
    value
}

/// Plain mini-batch gradient descent with a fixed step, reshuffling every
/// epoch. `stop` is consulted before the first epoch and after each one.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_sgd<M: Differentiable>(
    mut model: M,
    x: &Matrix,
    y: &[f64],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
    epochs: usize,
    penalty: Option<(f64, Penalty<'_, M>)>,
    stop: &mut dyn FnMut(&M) -> bool,
) -> Result<Trained<M>, ModelError> {
    check_xy(x, y)?;
    let mut best = objective(&model, x, y, penalty);
    if !best.is_finite() {
        return Err(ModelError::Divergence { epoch: 0 });
    }
    let mut curve = vec![best];
    if stop(&model) {
        return Ok(Trained {
            model,
            loss_curve: curve,
            epochs_run: 0,
        });
    }
    let n_params = model.params().len();
    let mut grad = vec![0.0; n_params];
    let mut extra = vec![0.0; n_params];
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut lr = config.learning_rate;
    let mut epochs_run = 0;
    let mut rejected = 0;
    for epoch in 1..=epochs {
        let snapshot = model.params().to_vec();
        order.shuffle(rng);
        for batch in order.chunks(config.batch_size) {
            let bx = x.select_rows(batch);
            let by: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
            let loss = model.loss_grad(&bx, &by, &mut grad);
            if !loss.is_finite() {
                return Err(ModelError::Divergence { epoch });
            }
            if let Some((lambda, p)) = penalty {
                extra.fill(0.0);
                p(&model, &mut extra);
                for (g, e) in grad.iter_mut().zip(&extra) {
                    *g += lambda * e;
                }
            }
            for (w, g) in model.params_mut().iter_mut().zip(&grad) {
                *w -= lr * g;
            }
        }
        epochs_run = epoch;
        let value = objective(&model, x, y, penalty);
        if !value.is_finite() {
            return Err(ModelError::Divergence { epoch });
        }
        if value > best + LOSS_TOLERANCE {
            model.params_mut().copy_from_slice(&snapshot);
            rejected += 1;
            if rejected == MAX_REJECTED {
                lr *= 0.5;
                rejected = 0;
            }
            log::debug!("epoch {epoch}: objective rose to {value}, rolled back, step {lr}");
        } else {
            best = value;
            rejected = 0;
        }
        curve.push(best);
        if stop(&model) {
            break;
        }
    }
    Ok(Trained {
        model,
        loss_curve: curve,
        epochs_run,
    })
}

/// Largest relative gap `|analytic - numeric| / (|analytic| + 1e-8)` between
/// the analytic MSE gradient and central differences with step `1e-5`.
pub fn finite_diff_gradcheck<M: Differentiable>(model: &M, x: &Matrix, y: &[f64]) -> f64 {
    let mut analytic = vec![0.0; model.params().len()];
    model.loss_grad(x, y, &mut analytic);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let original = probe.params()[i];
        probe.params_mut()[i] = original + GRADCHECK_STEP;
        let plus = probe.loss(x, y);
        probe.params_mut()[i] = original - GRADCHECK_STEP;
        let minus = probe.loss(x, y);
        probe.params_mut()[i] = original;
        let numeric = (plus - minus) / (2.0 * GRADCHECK_STEP);
        worst = worst.max((a - numeric).abs() / (a.abs() + 1e-8));
    }
    worst
}

/// Gradient check on a freshly initialized model of `kind` (seeded by
/// `config.seed`, hidden widths from `config.hidden`).
pub fn gradcheck_kind(kind: ModelKind, x: &Matrix, y: &[f64], config: &TrainConfig) -> Result<f64, ModelError> {
    check_xy(x, y)?;
    let mut rng = rng_for(config.seed, 0);
    Ok(match kind {
        ModelKind::Linear => finite_diff_gradcheck(&LinearModel::random(x.cols(), &mut rng), x, y),
        ModelKind::Mlp => finite_diff_gradcheck(&MlpModel::init(x.cols(), &config.hidden, &mut rng), x, y),
        ModelKind::Nam | ModelKind::NamMonotonic => {
            finite_diff_gradcheck(&NamModel::init(x.cols(), &config.hidden, &mut rng), x, y)
        }
    })
}
