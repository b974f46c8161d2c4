//! Squared-loss linear classifiers with an optional L1 penalty.
//!
//! The trainer minimizes
//!
//! ```text
//!   J(w, b) = 1/(2n) * sum_i (w . x_i + b - y_i)^2  +  lambda * ||w||_1
//! ```
//!
//! over weights `w` and an unpenalized bias `b`, by proximal gradient
//! descent: a gradient step on the smooth half followed by soft-thresholding
//! of the weights. The step size is the inverse of a trace bound on the
//! smooth Hessian, which makes the objective non-increasing iteration by
//! iteration; convergence is declared when the first-order optimality
//! (KKT) residual drops to the configured tolerance. With `lambda = 0`
//! this is plain least-squares classification; with `lambda > 0` the
//! soft-thresholding produces exact zeros, so the fitted weight vector's
//! support is meaningful.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// A linear decision function `x -> w . x + b`, classifying by sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    /// Feature weights.
    pub w: Vec<f64>,
    /// Bias (never L1-penalized).
    pub b: f64,
}

impl LinearClassifier {
    /// The zero function in `d` dimensions.
    pub fn zeros(d: usize) -> Self {
        LinearClassifier {
            w: vec![0.0; d],
            b: 0.0,
        }
    }

    /// Indices of nonzero weights.
    pub fn support(&self) -> Vec<usize> {
        (0..self.w.len()).filter(|&j| self.w[j] != 0.0).collect()
    }
}

/// Trainer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// L1 penalty weight; `0` disables regularization.
    pub lambda: f64,
    /// Iteration cap before the trainer reports non-convergence.
    pub max_iters: usize,
    /// KKT-residual tolerance for declaring convergence.
    pub tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.0,
            max_iters: 200_000,
            tol: 1e-8,
        }
    }
}

impl TrainConfig {
    /// Convenience constructor fixing only the penalty.
    pub fn with_lambda(lambda: f64) -> Self {
        TrainConfig {
            lambda,
            ..Self::default()
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Raw decision value `w . x + b`.
pub fn predict(model: &LinearClassifier, x: &[f64]) -> f64 {
    dot(&model.w, x) + model.b
}

/// Fraction of points whose predicted sign (`>= 0` maps to +1) differs from
/// their label.
pub fn test_error(model: &LinearClassifier, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("test_error needs at least one row".into()));
    }
    if model.w.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: model.w.len(),
        });
    }
    let wrong = data
        .iter()
        .filter(|(x, y)| (predict(model, x) >= 0.0) != (*y > 0.0))
        .count();
    Ok(wrong as f64 / data.len() as f64)
}

/// Mean squared-error half-objective `1/(2n) * sum_i (w . x_i + b - y_i)^2`.
///
/// This is the smooth part of the training objective, and also the quantity
/// the poisoning attack maximizes on its validation set.
pub fn half_mse(model: &LinearClassifier, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("half_mse needs at least one row".into()));
    }
    if model.w.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: model.w.len(),
        });
    }
    let sum: f64 = data
        .iter()
        .map(|(x, y)| {
            let r = predict(model, x) - y;
            r * r
        })
        .sum();
    Ok(sum / (2.0 * data.len() as f64))
}

/// Full training objective `half_mse + lambda * ||w||_1`.
pub fn lasso_objective(model: &LinearClassifier, data: &LabeledDataset, lambda: f64) -> Result<f64> {
    let l1: f64 = model.w.iter().map(|v| v.abs()).sum();
    Ok(half_mse(model, data)? + lambda * l1)
}

/// Soft-thresholding operator: shrink `x` toward zero by `t`, clamping to
/// zero inside `[-t, t]`.
pub(crate) fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Smallest penalty that forces the all-zero weight vector:
/// `max_j | 1/n * sum_i x_ij (y_i - mean(y)) |`.
pub fn lambda_max(data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("lambda_max needs at least one row".into()));
    }
    let n = data.len() as f64;
    let mean_y: f64 = data.labels().iter().sum::<f64>() / n;
    let d = data.dim();
    let mut best = 0.0f64;
    for j in 0..d {
        let mut s = 0.0;
        for (x, y) in data.iter() {
            s += x[j] * (y - mean_y);
        }
        best = best.max((s / n).abs());
    }
    Ok(best)
}

fn validate_train_inputs(
    data: &LabeledDataset,
    cfg: &TrainConfig,
    init: &LinearClassifier,
) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("cannot train on zero rows".into()));
    }
    if init.w.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: init.w.len(),
        });
    }
    if !(cfg.lambda.is_finite() && cfg.lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "lambda must be finite and >= 0, got {}",
            cfg.lambda
        )));
    }
    if cfg.max_iters == 0 {
        return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
    }
    if !(cfg.tol.is_finite() && cfg.tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "tol must be finite and > 0, got {}",
            cfg.tol
        )));
    }
    Ok(())
}

/// First-order optimality residual of the L1 objective at `(w, b)` given the
/// smooth gradient `(gw, gb)`.
///
/// Zero exactly at a minimizer: active weights must balance the penalty
/// (`gw_j = -lambda * sign(w_j)`), inactive weights must sit inside the
/// subgradient interval (`|gw_j| <= lambda`), and the bias gradient must
/// vanish.
fn kkt_residual(w: &[f64], gw: &[f64], gb: f64, lambda: f64) -> f64 {
    let mut res = gb.abs();
    for (&wj, &gj) in w.iter().zip(gw) {
        let r = if wj > 0.0 {
            (gj + lambda).abs()
        } else if wj < 0.0 {
            (gj - lambda).abs()
        } else {
            (gj.abs() - lambda).max(0.0)
        };
        res = res.max(r);
    }
    res
}

struct IstaOutcome {
    model: LinearClassifier,
    objective_trace: Vec<f64>,
}

fn ista(
    data: &LabeledDataset,
    cfg: &TrainConfig,
    init: &LinearClassifier,
    record_trace: bool,
) -> Result<IstaOutcome> {
    validate_train_inputs(data, cfg, init)?;
    let n = data.len();
    let d = data.dim();
    let nf = n as f64;

    // Trace bound on the smooth Hessian 1/n * [X 1]^T [X 1]; its inverse is
    // a safe (monotone) step size.
    let frob_sq: f64 = data.features_flat().iter().map(|v| v * v).sum::<f64>() + nf;
    let step = nf / frob_sq;

    let mut w = init.w.clone();
    let mut b = init.b;
    let mut residuals = vec![0.0; n];
    let mut gw = vec![0.0; d];
    let mut trace = Vec::new();
    let mut last_residual = f64::INFINITY;

    for _ in 0..cfg.max_iters {
        // Residuals and smooth gradient at the current iterate.
        let mut sq_sum = 0.0;
        for (i, (x, y)) in data.iter().enumerate() {
            let r = dot(&w, x) + b - y;
            residuals[i] = r;
            sq_sum += r * r;
        }
        gw.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for (i, (x, _)) in data.iter().enumerate() {
            let r = residuals[i];
            for (g, &xj) in gw.iter_mut().zip(x) {
                *g += r * xj;
            }
            gb += r;
        }
        gw.iter_mut().for_each(|g| *g /= nf);
        gb /= nf;

        if record_trace {
            let l1: f64 = w.iter().map(|v| v.abs()).sum();
            trace.push(sq_sum / (2.0 * nf) + cfg.lambda * l1);
        }

        last_residual = kkt_residual(&w, &gw, gb, cfg.lambda);
        if last_residual <= cfg.tol {
            return Ok(IstaOutcome {
                model: LinearClassifier { w, b },
                objective_trace: trace,
            });
        }

        for (wj, &gj) in w.iter_mut().zip(gw.iter()) {
            *wj = soft_threshold(*wj - step * gj, step * cfg.lambda);
        }
        b -= step * gb;
    }
    Err(Error::NonConvergence {
        what: "lasso trainer",
        iters: cfg.max_iters,
        residual: last_residual,
    })
}

/// Train from the zero model.
pub fn train_lasso(data: &LabeledDataset, cfg: &TrainConfig) -> Result<LinearClassifier> {
    train_lasso_warm(data, cfg, &LinearClassifier::zeros(data.dim()))
}

/// Train starting from `init` — used heavily by the poisoning attack, whose
/// inner problems differ by a single moved point.
pub fn train_lasso_warm(
    data: &LabeledDataset,
    cfg: &TrainConfig,
    init: &LinearClassifier,
) -> Result<LinearClassifier> {
    Ok(ista(data, cfg, init, false)?.model)
}

/// Train from zeros and also return the per-iteration objective values
/// (useful for monotonicity checks and debugging).
pub fn train_lasso_traced(
    data: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(LinearClassifier, Vec<f64>)> {
    let out = ista(data, cfg, &LinearClassifier::zeros(data.dim()), true)?;
    Ok((out.model, out.objective_trace))
}

/// Pick a penalty from `grid` by k-fold cross-validated classification
/// error, breaking ties toward the larger (sparser) penalty.
///
/// Folds are contiguous index ranges of the dataset as given; shuffle first
/// if the row order is meaningful.
pub fn cv_lambda(data: &LabeledDataset, folds: usize, grid: &[f64]) -> Result<f64> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!(
            "cross-validation needs >= 2 folds, got {folds}"
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty lambda grid".into()));
    }
    if grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::InvalidConfig("lambda grid values must be finite and >= 0".into()));
    }
    let n = data.len();
    if n < folds {
        return Err(Error::InvalidConfig(format!(
            "{folds} folds need at least {folds} rows, got {n}"
        )));
    }

    let mut best: Option<(f64, f64)> = None; // (mean error, lambda)
    for &lambda in grid {
        let mut wrong = 0usize;
        for fold in 0..folds {
            let lo = fold * n / folds;
            let hi = (fold + 1) * n / folds;
            let holdout: Vec<usize> = (lo..hi).collect();
            let rest: Vec<usize> = (0..lo).chain(hi..n).collect();
            let model = train_lasso(&data.subset(&rest), &TrainConfig::with_lambda(lambda))?;
            let held = data.subset(&holdout);
            wrong += (test_error(&model, &held)? * held.len() as f64).round() as usize;
        }
        let err = wrong as f64 / n as f64;
        let better = match best {
            None => true,
            Some((be, bl)) => err < be || (err == be && lambda > bl),
        };
        if better {
            best = Some((err, lambda));
        }
    }
    Ok(best.expect("grid is nonempty").1)
}

/// The penalty grid used by the experiment harness: five decades anchored at
/// [`lambda_max`].
pub fn default_lambda_grid(data: &LabeledDataset) -> Result<Vec<f64>> {
    let anchor = lambda_max(data)?;
    Ok([1e-4, 1e-3, 1e-2, 1e-1, 1.0]
        .iter()
        .map(|f| f * anchor)
        .collect())
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    w: Vec<f64>,
    b: f64,
    lambda: f64,
}

/// Write a model (plus the penalty it was trained with) as JSON.
pub fn save_model_json(
    path: impl AsRef<Path>,
    model: &LinearClassifier,
    lambda: f64,
) -> Result<()> {
    let file = ModelFile {
        w: model.w.clone(),
        b: model.b,
        lambda,
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

/// Read a model written by [`save_model_json`]; returns the model and its
/// training penalty.
pub fn load_model_json(path: impl AsRef<Path>) -> Result<(LinearClassifier, f64)> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    Ok((LinearClassifier { w: file.w, b: file.b }, file.lambda))
}
