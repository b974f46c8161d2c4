//! Python bindings for the poisoning-attack/defence library.
//!
//! The module mirrors the core surface with plain-Python types: datasets
//! travel as `list[list[float]]` features plus `list[float]` labels in
//! {-1.0, +1.0}; models as `(weights, bias)` tuples; experiment configs as
//! JSON strings matching the command-line tool's schema.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use poisonlab::attack_flipping::{self, FlipSpec};
use poisonlab::attack_optimal::{self, AttackConfig, TargetMode};
use poisonlab::dataset::{gen_gaussian_binary, GaussianSpec, LabeledDataset};
use poisonlab::defence::{self, NoiseRates, RlsConfig};
use poisonlab::harness;
use poisonlab::linear_model::{self, LinearClassifier, TrainConfig};
use poisonlab::outlier::ScorerConfig;

fn err(e: poisonlab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dataset(features: Vec<Vec<f64>>, labels: Vec<f64>) -> PyResult<LabeledDataset> {
    LabeledDataset::new(features, labels).map_err(err)
}

fn model(weights: Vec<f64>, bias: f64) -> LinearClassifier {
    LinearClassifier { w: weights, b: bias }
}

fn parse_target_mode(name: &str) -> PyResult<TargetMode> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown target mode {name:?}")))
}

fn parse_scorer(kind: &str, k: usize, s: usize, seed: u64) -> PyResult<ScorerConfig> {
    let kind = serde_json::from_value(serde_json::Value::String(kind.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown scorer kind {kind:?}")))?;
    Ok(ScorerConfig {
        k,
        s,
        seed,
        ..ScorerConfig::new(kind)
    })
}

/// Draw two Gaussian blobs (+1 class first); returns (features, labels).
#[pyfunction]
#[pyo3(signature = (mean_pos, mean_neg, cov_scale, n_per_class, seed=0))]
fn gen_gaussian(
    mean_pos: Vec<f64>,
    mean_neg: Vec<f64>,
    cov_scale: f64,
    n_per_class: usize,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let data = gen_gaussian_binary(&GaussianSpec {
        mean_pos,
        mean_neg,
        cov_scale,
        n_per_class,
        seed,
    })
    .map_err(err)?;
    Ok(split_dataset(&data))
}

fn split_dataset(data: &LabeledDataset) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut xs = Vec::with_capacity(data.len());
    let mut ys = Vec::with_capacity(data.len());
    for (x, y) in data.iter() {
        xs.push(x.to_vec());
        ys.push(y);
    }
    (xs, ys)
}

/// Train the l1-penalized least-squares classifier; returns (weights, bias).
#[pyfunction]
#[pyo3(name = "train_lasso")]
fn py_train_lasso(
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    lambda_: f64,
) -> PyResult<(Vec<f64>, f64)> {
    let data = dataset(features, labels)?;
    let m = linear_model::train_lasso(&data, &TrainConfig::with_lambda(lambda_)).map_err(err)?;
    Ok((m.w, m.b))
}

/// Per-row decision values `w . x + b` (classify by sign).
#[pyfunction]
fn decision_values(weights: Vec<f64>, bias: f64, features: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let m = model(weights, bias);
    features
        .iter()
        .map(|x| {
            if x.len() != m.w.len() {
                Err(PyValueError::new_err(format!(
                    "row has {} features, model has {}",
                    x.len(),
                    m.w.len()
                )))
            } else {
                Ok(linear_model::predict(&m, x))
            }
        })
        .collect()
}

/// Fraction of sign mismatches on a labeled set.
#[pyfunction]
#[pyo3(name = "test_error")]
fn py_test_error(
    weights: Vec<f64>,
    bias: f64,
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
) -> PyResult<f64> {
    let data = dataset(features, labels)?;
    linear_model::test_error(&model(weights, bias), &data).map_err(err)
}

/// Half mean squared error of the decision values against the labels.
#[pyfunction]
#[pyo3(name = "half_mse")]
fn py_half_mse(
    weights: Vec<f64>,
    bias: f64,
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
) -> PyResult<f64> {
    let data = dataset(features, labels)?;
    linear_model::half_mse(&model(weights, bias), &data).map_err(err)
}

/// Pick the penalty by k-fold cross-validation over the built-in grid.
#[pyfunction]
#[pyo3(name = "cv_lambda", signature = (features, labels, folds=5))]
fn py_cv_lambda(features: Vec<Vec<f64>>, labels: Vec<f64>, folds: usize) -> PyResult<f64> {
    let data = dataset(features, labels)?;
    let grid = linear_model::default_lambda_grid(&data).map_err(err)?;
    linear_model::cv_lambda(&data, folds, &grid).map_err(err)
}

/// Outcome of the gradient-ascent poisoning attack.
#[pyclass(frozen)]
struct AttackResult {
    /// Crafted feature rows.
    #[pyo3(get)]
    poison_features: Vec<Vec<f64>>,
    /// Their fixed labels.
    #[pyo3(get)]
    poison_labels: Vec<f64>,
    /// Weights of the final model trained on train + poison.
    #[pyo3(get)]
    weights: Vec<f64>,
    #[pyo3(get)]
    bias: f64,
    /// Attacker objective before any ascent step.
    #[pyo3(get)]
    initial_objective: f64,
    /// Final attacker objective (half validation MSE).
    #[pyo3(get)]
    objective: f64,
    #[pyo3(get)]
    converged: bool,
    /// Per-update rows (outer_iter, point_index, eta, objective).
    #[pyo3(get)]
    trace: Vec<(usize, usize, f64, f64)>,
}

/// Run the gradient-ascent poisoning attack; labels of the crafted points
/// follow `target_mode` ("alternate", "all_positive", or "all_negative").
#[pyfunction]
#[pyo3(signature = (
    train_features, train_labels, val_features, val_labels, lambda_, q,
    box_low, box_high, epsilon=1e-5, max_outer_iters=50, gs_tol=1e-3,
    round_binary=false, target_mode="alternate"
))]
#[allow(clippy::too_many_arguments)]
fn run_optimal_attack(
    train_features: Vec<Vec<f64>>,
    train_labels: Vec<f64>,
    val_features: Vec<Vec<f64>>,
    val_labels: Vec<f64>,
    lambda_: f64,
    q: usize,
    box_low: f64,
    box_high: f64,
    epsilon: f64,
    max_outer_iters: usize,
    gs_tol: f64,
    round_binary: bool,
    target_mode: &str,
) -> PyResult<AttackResult> {
    let train = dataset(train_features, train_labels)?;
    let val = dataset(val_features, val_labels)?;
    let d = train.dim();
    let config = AttackConfig {
        q,
        epsilon,
        box_low: vec![box_low; d],
        box_high: vec![box_high; d],
        max_outer_iters,
        gs_tol,
        round_binary,
        target_mode: parse_target_mode(target_mode)?,
    };
    let out = attack_optimal::run_optimal_attack(&train, &val, &config, lambda_).map_err(err)?;
    Ok(AttackResult {
        poison_features: (0..out.poison.len())
            .map(|j| out.poison.point(j).to_vec())
            .collect(),
        poison_labels: out.poison.labels().to_vec(),
        weights: out.model.w,
        bias: out.model.b,
        initial_objective: out.initial_objective,
        objective: out.objective,
        converged: out.converged,
        trace: out
            .trace
            .iter()
            .map(|r| (r.outer_iter, r.point_index, r.eta, r.objective))
            .collect(),
    })
}

/// Flip `round(fraction * n)` uniformly chosen labels; returns the new
/// label vector and the sorted flipped indices.
#[pyfunction]
#[pyo3(name = "rlf", signature = (features, labels, fraction, seed=0))]
fn py_rlf(
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    fraction: f64,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<usize>)> {
    let data = dataset(features, labels)?;
    let out = attack_flipping::rlf(&data, &FlipSpec { fraction, seed }).map_err(err)?;
    let (_, ys) = split_dataset(&out.data);
    Ok((ys, out.flipped))
}

/// Flip the labels with the largest flipped-label squared residual under a
/// clean model at `lambda`; returns new labels and flipped indices.
#[pyfunction]
#[pyo3(name = "ilf")]
fn py_ilf(
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    lambda_: f64,
    fraction: f64,
) -> PyResult<(Vec<f64>, Vec<usize>)> {
    let data = dataset(features, labels)?;
    let out = attack_flipping::ilf(&data, lambda_, fraction).map_err(err)?;
    let (_, ys) = split_dataset(&out.data);
    Ok((ys, out.flipped))
}

/// Per-class outlier filter calibrated on a trusted sample.
#[pyclass(frozen)]
struct Defence {
    inner: defence::DefenceModel,
}

#[pymethods]
impl Defence {
    /// Fit per-class scorers ("knn", "sampled_knn", "sp", "ocsvm", or
    /// "lof") on the trusted set and set thresholds at the alpha-quantile
    /// of the trusted self-scores.
    #[new]
    #[pyo3(signature = (trusted_features, trusted_labels, kind, alpha, k=5, s=20, seed=0))]
    fn new(
        trusted_features: Vec<Vec<f64>>,
        trusted_labels: Vec<f64>,
        kind: &str,
        alpha: f64,
        k: usize,
        s: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let trusted = dataset(trusted_features, trusted_labels)?;
        let scorer = parse_scorer(kind, k, s, seed)?;
        let inner = defence::fit_defence(&trusted, &scorer, alpha).map_err(err)?;
        Ok(Defence { inner })
    }

    /// Split a labeled set into kept and removed row indices.
    fn filter(
        &self,
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
    ) -> PyResult<(Vec<usize>, Vec<usize>)> {
        let data = dataset(features, labels)?;
        let (_, removed) = self.inner.filter(&data).map_err(err)?;
        let removed_set: std::collections::BTreeSet<usize> = removed.iter().copied().collect();
        let kept = (0..data.len()).filter(|i| !removed_set.contains(i)).collect();
        Ok((kept, removed))
    }

    /// Outlier score of one point under its class's scorer.
    fn score(&self, features: Vec<f64>, label: f64) -> PyResult<f64> {
        self.inner.score(&features, label).map_err(err)
    }

    /// Removal threshold for a class label.
    fn threshold(&self, label: f64) -> f64 {
        self.inner.threshold(label)
    }

    /// JSON summary (detector, alpha, thresholds, trusted counts).
    fn summary_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.summary())
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

/// Train with the noise-corrected squared loss under the given flip rates;
/// returns (weights, bias).
#[pyfunction]
#[pyo3(name = "train_rls", signature = (features, labels, rho_pos, rho_neg, learning_rate=0.1, iters=1000))]
fn py_train_rls(
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    rho_pos: f64,
    rho_neg: f64,
    learning_rate: f64,
    iters: usize,
) -> PyResult<(Vec<f64>, f64)> {
    let data = dataset(features, labels)?;
    let cfg = RlsConfig {
        rates: NoiseRates { rho_pos, rho_neg },
        learning_rate,
        iters,
    };
    let m = defence::train_rls(&data, &cfg).map_err(err)?;
    Ok((m.w, m.b))
}

/// Cross-validate the flip rates over the built-in grid; returns
/// (rho_pos, rho_neg).
#[pyfunction]
#[pyo3(name = "cv_noise_rates", signature = (features, labels, folds=5, symmetric=false, learning_rate=0.1, iters=1000))]
fn py_cv_noise_rates(
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    folds: usize,
    symmetric: bool,
    learning_rate: f64,
    iters: usize,
) -> PyResult<(f64, f64)> {
    let data = dataset(features, labels)?;
    let grid = if symmetric {
        defence::default_noise_grid()
    } else {
        defence::full_noise_grid()
    };
    let rates =
        defence::cv_noise_rates(&data, folds, &grid, learning_rate, iters).map_err(err)?;
    Ok((rates.rho_pos, rates.rho_neg))
}

/// Run a full experiment from a JSON config (same schema as the CLI);
/// returns (report_csv, failures).
#[pyfunction]
#[pyo3(name = "run_experiment")]
fn py_run_experiment(config_json: &str) -> PyResult<(String, Vec<String>)> {
    let cfg: harness::ExperimentConfig =
        serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = harness::run_experiment(&cfg).map_err(err)?;
    Ok((report.to_csv(), report.failures))
}

/// Run the 2-D single-point trajectory demo; `config_json` overrides the
/// built-in scenario. Returns (trajectory_csv, summary_json).
#[pyfunction]
#[pyo3(signature = (config_json=None))]
fn trajectory_demo(config_json: Option<&str>) -> PyResult<(String, String)> {
    let cfg: harness::Fig1Config = match config_json {
        Some(text) => {
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?
        }
        None => harness::Fig1Config::default(),
    };
    let demo = harness::run_trajectory_demo(&cfg).map_err(err)?;
    let mut csv = String::from("iter,x1,x2,objective\n");
    for r in &demo.rows {
        csv.push_str(&format!("{},{},{},{}\n", r.iter, r.x1, r.x2, r.objective));
    }
    let summary = serde_json::json!({
        "lambda": demo.lambda,
        "poison_label": demo.poison_label,
        "clean_model": {"w": demo.clean_model.w, "b": demo.clean_model.b},
        "poisoned_model": {"w": demo.poisoned_model.w, "b": demo.poisoned_model.b},
        "clean_objective": demo.clean_objective,
        "final_objective": demo.final_objective,
        "converged": demo.converged,
    });
    Ok((csv, summary.to_string()))
}

#[pymodule]
fn _poisonlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(gen_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(py_train_lasso, m)?)?;
    m.add_function(wrap_pyfunction!(decision_values, m)?)?;
    m.add_function(wrap_pyfunction!(py_test_error, m)?)?;
    m.add_function(wrap_pyfunction!(py_half_mse, m)?)?;
    m.add_function(wrap_pyfunction!(py_cv_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(run_optimal_attack, m)?)?;
    m.add_function(wrap_pyfunction!(py_rlf, m)?)?;
    m.add_function(wrap_pyfunction!(py_ilf, m)?)?;
    m.add_function(wrap_pyfunction!(py_train_rls, m)?)?;
    m.add_function(wrap_pyfunction!(py_cv_noise_rates, m)?)?;
    m.add_function(wrap_pyfunction!(py_run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(trajectory_demo, m)?)?;
    m.add_class::<AttackResult>()?;
    m.add_class::<Defence>()?;
    Ok(())
}
