//! Weak pairwise monotonicity between α lags.
//!
//! A model is audited at equal values `a` of a more recent lag (`important`)
//! and an older lag (`lesser`): bumping the older lag by `c` must not move
//! the output more than bumping the recent lag by `c`,
//!
//! ```text
//! |f(a, a + c, ctx) - f(a, a, ctx)| <= |f(a + c, a, ctx) - f(a, a, ctx)|
//! ```
//!
//! for `a` on an `m`-point grid over `[0, 1]` and contexts `ctx` (all other
//! columns) sampled from the training rows.

use std::io::Write;
use std::path::Path;

use rand::Rng;

use super::nam::NamModel;
use super::net::Trace;
use super::train::{rng_for, run_sgd, Trained};
use super::{check_xy, fit_nam, ModelError, Regressor, TrainConfig};
use crate::features::DatasetLayout;
use crate::matrix::Matrix;

pub const AUDIT_HEADER: &str = "grid_point,context_id,delta_beta,delta_gamma,violation";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct MonotonicityConstraint {
    /// Column of the more recent α lag.
    pub important_index: usize,
    /// Column of the older α lag.
    pub lesser_index: usize,
}

impl MonotonicityConstraint {
    /// Both columns must be α lags of `layout`, with `important` strictly
    /// more recent.
    pub fn new(important_index: usize, lesser_index: usize, layout: &DatasetLayout) -> Result<Self, ModelError> {
        if !layout.is_alpha_column(important_index) || !layout.is_alpha_column(lesser_index) {
            return Err(ModelError::Constraint(format!(
                "columns {important_index} and {lesser_index} must both be alpha lags (0..{})",
                layout.k
            )));
        }
        if important_index <= lesser_index {
            return Err(ModelError::Constraint(format!(
                "column {important_index} is not more recent than column {lesser_index}"
            )));
        }
        Ok(MonotonicityConstraint {
            important_index,
            lesser_index,
        })
    }

    fn check(&self, n_features: usize) -> Result<(), ModelError> {
        if self.important_index == self.lesser_index {
            return Err(ModelError::Constraint("indices must differ".into()));
        }
        if self.important_index >= n_features || self.lesser_index >= n_features {
            return Err(ModelError::Constraint(format!(
                "indices ({}, {}) out of range for {n_features} features",
                self.important_index, self.lesser_index
            )));
        }
        Ok(())
    }
}

/// Every (more recent, older) α pair, most recent first:
/// for k = 3, `(α3, α2), (α3, α1), (α2, α1)`.
pub fn alpha_chain(layout: &DatasetLayout) -> Vec<MonotonicityConstraint> {
    let mut out = Vec::new();
    for newer in (2..=layout.k).rev() {
        for older in (1..newer).rev() {
            out.push(MonotonicityConstraint {
                important_index: layout.alpha_column(newer),
                lesser_index: layout.alpha_column(older),
            });
        }
    }
    out
}

/// Rows whose non-constrained columns serve as contexts.
#[derive(Debug, Clone, PartialEq)]
pub enum AuditContexts {
    /// The same contexts at every grid point.
    Shared(Matrix),
    /// One independent draw per grid point.
    PerGrid(Vec<Matrix>),
}

impl AuditContexts {
    /// Draws `n` rows uniformly (with replacement) from `train` for each of
    /// `grid_points` grid points.
    pub fn sample(train: &Matrix, grid_points: usize, n: usize, seed: u64) -> Result<Self, ModelError> {
        if train.rows() == 0 || n == 0 {
            return Err(ModelError::EmptyInput);
        }
        let mut rng = rng_for(seed, 2);
        Ok(AuditContexts::PerGrid(
            (0..grid_points)
                .map(|_| {
                    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..train.rows())).collect();
                    train.select_rows(&idx)
                })
                .collect(),
        ))
    }

    fn at(&self, g: usize) -> &Matrix {
        match self {
            AuditContexts::Shared(m) => m,
            AuditContexts::PerGrid(v) => &v[g],
        }
    }

    fn validate(&self, grid_points: usize, n_features: usize) -> Result<(), ModelError> {
        let sets: Vec<&Matrix> = match self {
            AuditContexts::Shared(m) => vec![m],
            AuditContexts::PerGrid(v) => {
                if v.len() != grid_points {
                    return Err(ModelError::Constraint(format!(
                        "{} context sets for {grid_points} grid points",
                        v.len()
                    )));
                }
                v.iter().collect()
            }
        };
        for m in sets {
            if m.rows() == 0 {
                return Err(ModelError::EmptyInput);
            }
            super::check_features(n_features, m)?;
        }
        Ok(())
    }
}

fn grid(grid_points: usize) -> Vec<f64> {
    let last = (grid_points - 1) as f64;
    (0..grid_points).map(|g| g as f64 / last).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditRow {
    pub grid_point: f64,
    pub context_id: usize,
    pub delta_beta: f64,
    pub delta_gamma: f64,
    pub violation: f64,
}

/// One row per (grid point, context).
pub fn audit(
    model: &dyn Regressor,
    constraint: MonotonicityConstraint,
    grid_points: usize,
    step: f64,
    contexts: &AuditContexts,
) -> Result<Vec<AuditRow>, ModelError> {
    if grid_points < 2 || step.is_nan() || step <= 0.0 {
        return Err(ModelError::InvalidConfig("audit needs m >= 2 and c > 0".into()));
    }
    let n_features = model.n_features();
    constraint.check(n_features)?;
    contexts.validate(grid_points, n_features)?;
    let (b, l) = (constraint.important_index, constraint.lesser_index);
    let mut rows = Vec::new();
    for (g, a) in grid(grid_points).into_iter().enumerate() {
        let ctx = contexts.at(g);
        let n = ctx.rows();
        let mut probe = Matrix::zeros(3 * n, n_features);
        for (i, row) in ctx.iter_rows().enumerate() {
            for (slot, shift_b, shift_l) in [(i, 0.0, 0.0), (n + i, 0.0, step), (2 * n + i, step, 0.0)] {
                let r = probe.row_mut(slot);
                r.copy_from_slice(row);
                r[b] = a + shift_b;
                r[l] = a + shift_l;
            }
        }
        let f = model.predict(&probe)?;
        for i in 0..n {
            let delta_gamma = f[n + i] - f[i];
            let delta_beta = f[2 * n + i] - f[i];
            rows.push(AuditRow {
                grid_point: a,
                context_id: i,
                delta_beta,
                delta_gamma,
                violation: (delta_gamma.abs() - delta_beta.abs()).max(0.0),
            });
        }
    }
    Ok(rows)
}

/// Sum of `max(0, |delta_gamma| - |delta_beta|)` over the grid and contexts.
/// Zero exactly when the audit finds no violation.
pub fn monotonic_violation(
    model: &dyn Regressor,
    constraint: MonotonicityConstraint,
    grid_points: usize,
    step: f64,
    contexts: &AuditContexts,
) -> Result<f64, ModelError> {
    Ok(audit(model, constraint, grid_points, step, contexts)?
        .iter()
        .map(|r| r.violation)
        .sum())
}

pub fn write_audit_csv<W: Write>(rows: &[AuditRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{AUDIT_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.grid_point, r.context_id, r.delta_beta, r.delta_gamma, r.violation
        )?;
    }
    out.flush()
}

impl AuditRow {
    pub fn save_csv(rows: &[AuditRow], path: &Path) -> std::io::Result<()> {
        let file = std::fs::File::create(path)?;
        write_audit_csv(rows, std::io::BufWriter::new(file))
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Context-free form of the audit for an additive model, where the other
/// columns cancel: `sum_g max(0, |dg_lesser| - |dg_important| + margin)`.
/// Accumulates its gradient into `grad` when given.
pub(crate) fn nam_penalty(
    model: &NamModel,
    constraints: &[MonotonicityConstraint],
    grid_points: usize,
    step: f64,
    margin: f64,
    grad: Option<&mut [f64]>,
) -> f64 {
    let points = grid(grid_points);
    let m = points.len();
    let mut inputs = points.clone();
    inputs.extend(points.iter().map(|a| a + step));

    let mut columns: Vec<usize> = constraints
        .iter()
        .flat_map(|c| [c.important_index, c.lesser_index])
        .collect();
    columns.sort_unstable();
    columns.dedup();
    let traces: Vec<Trace> = columns
        .iter()
        .map(|&j| {
            let mut t = Trace::default();
            model.subnet_forward(j, &inputs, &mut t);
            t
        })
        .collect();
    let slot = |j: usize| columns.binary_search(&j).unwrap();
    let mut deltas = vec![vec![0.0; 2 * m]; columns.len()];
    let mut value = 0.0;
    for c in constraints {
        let (ib, il) = (slot(c.important_index), slot(c.lesser_index));
        let (ob, ol) = (traces[ib].output(), traces[il].output());
        for g in 0..m {
            let d_beta = ob[m + g] - ob[g];
            let d_gamma = ol[m + g] - ol[g];
            let h = d_gamma.abs() - d_beta.abs() + margin;
            if h > 0.0 {
                value += h;
                let (sg, sb) = (sign(d_gamma), sign(d_beta));
                deltas[il][m + g] += sg;
                deltas[il][g] -= sg;
                deltas[ib][m + g] -= sb;
                deltas[ib][g] += sb;
            }
        }
    }
    if let Some(grad) = grad {
        for ((&j, trace), delta) in columns.iter().zip(&traces).zip(&deltas) {
            if delta.iter().any(|d| *d != 0.0) {
                model.subnet_backward(j, trace, delta, grad);
            }
        }
    }
    value
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicFit {
    /// Final model (the step-one model when no penalized epochs ran).
    pub model: NamModel,
    /// Plain NAM fit, identical to [`fit_nam`] with the same config.
    pub unconstrained: Trained<NamModel>,
    /// Penalized objective before and after each step-two epoch.
    pub penalized_curve: Vec<f64>,
    pub step_two_epochs: usize,
    /// Audited violation per constraint for the returned model.
    pub violations: Vec<f64>,
    pub achieved_zero: bool,
}

impl MonotonicFit {
    pub fn total_violation(&self) -> f64 {
        self.violations.iter().sum()
    }
}

/// Two-step training: plain NAM fit, then training on
/// `MSE + lambda * penalty` until the audit over `constraints` reports zero
/// or `config.epochs` penalized epochs have run. Running out of budget is
/// reported through [`MonotonicFit::achieved_zero`], not as an error.
pub fn fit_nam_monotonic(
    x: &Matrix,
    y: &[f64],
    config: &TrainConfig,
    constraints: &[MonotonicityConstraint],
) -> Result<MonotonicFit, ModelError> {
    config.validate()?;
    check_xy(x, y)?;
    for c in constraints {
        c.check(x.cols())?;
    }
    let unconstrained = fit_nam(x, y, config)?;
    let contexts = AuditContexts::sample(x, config.grid_points, config.contexts, config.seed)?;
    let audit_all = |model: &NamModel| -> Result<Vec<f64>, ModelError> {
        constraints
            .iter()
            .map(|&c| monotonic_violation(model, c, config.grid_points, config.step, &contexts))
            .collect()
    };
    let mut violations = audit_all(&unconstrained.model)?;
    let clean = |v: &[f64]| v.iter().all(|x| *x == 0.0);
    if config.lambda == 0.0 || constraints.is_empty() || clean(&violations) {
        return Ok(MonotonicFit {
            model: unconstrained.model.clone(),
            achieved_zero: clean(&violations),
            penalized_curve: Vec::new(),
            step_two_epochs: 0,
            violations,
            unconstrained,
        });
    }

    let penalty = |m: &NamModel, grad: &mut [f64]| {
        nam_penalty(
            m,
            constraints,
            config.grid_points,
            config.step,
            config.margin,
            Some(grad),
        )
    };
    let mut audit_error = None;
    let mut stop = |m: &NamModel| {
        // The context-free check is exact for additive models up to rounding
        // and much cheaper; the sampled audit confirms it.
        if nam_penalty(m, constraints, config.grid_points, config.step, 0.0, None) > 0.0 {
            return false;
        }
        match audit_all(m) {
            Ok(v) => clean(&v),
            Err(e) => {
                audit_error = Some(e);
                true
            }
        }
    };
    let mut rng = rng_for(config.seed, 1);
    let step_two = run_sgd(
        unconstrained.model.clone(),
        x,
        y,
        config,
        &mut rng,
        config.epochs,
        Some((config.lambda, &penalty)),
        &mut stop,
    )?;
    if let Some(e) = audit_error {
        return Err(e);
    }
    violations = audit_all(&step_two.model)?;
    let achieved_zero = clean(&violations);
    if !achieved_zero {
        log::warn!(
            "monotonic training stopped after {} penalized epochs with violation {}",
            step_two.epochs_run,
            violations.iter().sum::<f64>()
        );
    }
    Ok(MonotonicFit {
        model: step_two.model,
        unconstrained,
        penalized_curve: step_two.loss_curve,
        step_two_epochs: step_two.epochs_run,
        violations,
        achieved_zero,
    })
}
