//! Experiment harness: wires datasets, attacks, defences, and metrics into
//! seeded, reproducible runs and emits CSV reports.
//!
//! A run is described by an [`ExperimentConfig`] (deserialized from JSON by
//! the CLI). For every poisoning fraction and repetition the harness
//! splits the data pool with a derived seed, crafts the attack, applies
//! the defence, trains the final model, and records test error plus
//! removal accounting. Aggregates land in an [`ExperimentReport`] whose
//! CSV form is byte-stable across runs except for the wall-time column.
//!
//! The trusted split (`od_train`) is handed to the defence *before* any
//! attack runs, so the defence's trust assumption holds structurally — no
//! code path can poison it.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::attack_flipping::{ilf, rlf, FlipSpec};
use crate::attack_optimal::{
    choose_initial_points, run_optimal_attack, AttackConfig, TargetMode,
};
use crate::dataset::{
    gen_gaussian_binary, load_mnist_1v7, load_spambase, split, DatasetSplit, GaussianSpec,
    LabeledDataset, SplitSpec,
};
use crate::defence::{
    cv_noise_rates, default_noise_grid, fit_defence, full_noise_grid, train_rls, RlsConfig,
};
use crate::error::{Error, Result};
use crate::linear_model::{
    cv_lambda, default_lambda_grid, half_mse, test_error, train_lasso, LinearClassifier,
    TrainConfig,
};
use crate::outlier::{ScorerConfig, ScorerKind};
use crate::rng;

/// Where the data pool comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// Two seeded Gaussian blobs.
    Synthetic {
        #[serde(flatten)]
        gaussian: GaussianSpec,
    },
    /// The 58-column e-mail corpus CSV (binarized word indicators).
    Spambase { path: PathBuf },
    /// IDX image/label pair restricted to digits 1 and 7.
    Mnist17 { images: PathBuf, labels: PathBuf },
}

impl DatasetSpec {
    fn name(&self) -> &'static str {
        match self {
            DatasetSpec::Synthetic { .. } => "synthetic",
            DatasetSpec::Spambase { .. } => "spambase",
            DatasetSpec::Mnist17 { .. } => "mnist17",
        }
    }
}

fn default_epsilon() -> f64 {
    1e-5
}
fn default_max_outer() -> usize {
    50
}
fn default_gs_tol() -> f64 {
    1e-3
}

/// Which attack corrupts the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackSpec {
    /// Clean baseline (poisoning fractions are carried through to the
    /// report but have no effect).
    None,
    /// Gradient-ascent point insertion; the budget `q = round(f * n)`
    /// comes from the poisoning fraction. The box is uniform across
    /// coordinates.
    Optimal {
        box_low: f64,
        box_high: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_max_outer")]
        max_outer_iters: usize,
        #[serde(default = "default_gs_tol")]
        gs_tol: f64,
        #[serde(default)]
        round_binary: bool,
        #[serde(default)]
        target_mode: TargetMode,
    },
    /// Random label flipping of `round(f * n)` rows.
    Rlf {
        #[serde(default)]
        seed: u64,
    },
    /// Informed label flipping of the largest flipped-residual rows.
    Ilf,
}

impl AttackSpec {
    fn name(&self) -> &'static str {
        match self {
            AttackSpec::None => "none",
            AttackSpec::Optimal { .. } => "optimal",
            AttackSpec::Rlf { .. } => "rlf",
            AttackSpec::Ilf => "ilf",
        }
    }
}

/// Which flip-rate grid the robust-loss defence cross-validates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseGrid {
    /// Symmetric grid under random flipping, full product otherwise.
    #[default]
    Auto,
    Symmetric,
    Full,
}

fn default_rls_lr() -> f64 {
    0.1
}
fn default_rls_iters() -> usize {
    1000
}
fn default_cv_folds() -> usize {
    5
}

/// What stands between the poisoned data and the final model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DefenceSpec {
    /// Train directly on the poisoned set.
    None,
    /// Per-class outlier filtering calibrated on the trusted split.
    Detector { scorer: ScorerConfig, alpha: f64 },
    /// Noise-corrected loss with cross-validated flip rates; replaces the
    /// lasso trainer and removes nothing.
    Rls {
        #[serde(default = "default_rls_lr")]
        learning_rate: f64,
        #[serde(default = "default_rls_iters")]
        iters: usize,
        #[serde(default = "default_cv_folds")]
        folds: usize,
        #[serde(default)]
        grid: NoiseGrid,
    },
}

impl DefenceSpec {
    fn name(&self) -> String {
        match self {
            DefenceSpec::None => "none".to_string(),
            DefenceSpec::Detector { scorer, .. } => scorer.kind.name().to_string(),
            DefenceSpec::Rls { .. } => "rls".to_string(),
        }
    }

    fn alpha(&self) -> Option<f64> {
        match self {
            DefenceSpec::Detector { alpha, .. } => Some(*alpha),
            _ => None,
        }
    }
}

/// How the lasso penalty is chosen per repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaPolicy {
    Fixed { lambda: f64 },
    /// 5-fold CV on the training set carrying the attack's initial
    /// corruption (inserted warm-start points, or the flipped labels),
    /// fixed once per repetition.
    CvOnWarmStart {
        #[serde(default = "default_cv_folds")]
        folds: usize,
    },
}

fn default_fractions() -> Vec<f64> {
    vec![0.0, 0.05, 0.10, 0.15, 0.20]
}
fn default_one() -> usize {
    1
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    /// Sizes of the four-way split; its seed field is overridden per
    /// repetition by `base_seed + r`.
    pub split: SplitSpec,
    pub attack: AttackSpec,
    #[serde(default = "default_fractions")]
    pub poison_fractions: Vec<f64>,
    pub defence: DefenceSpec,
    /// Number of independent splits.
    #[serde(default = "default_one")]
    pub repetitions: usize,
    /// Extra runs per split for pipelines with their own randomness
    /// (random flipping, sampling detectors); deterministic pipelines
    /// always run once per split.
    #[serde(default = "default_one")]
    pub inner_repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub lambda_policy: LambdaPolicy,
}

/// One aggregated report line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub attack: String,
    pub defence: String,
    /// Threshold quantile of the detector defence; absent otherwise.
    pub alpha: Option<f64>,
    pub fraction: f64,
    pub mean_test_error: f64,
    pub std_test_error: f64,
    /// Mean fraction of malicious points the defence removed (0 when the
    /// defence removes nothing or no malicious points exist).
    pub mean_removed_poison_fraction: f64,
    /// Mean fraction of genuine points the defence removed.
    pub mean_removed_genuine_fraction: f64,
    /// Seconds spent on this row — excluded from the determinism contract.
    pub wall_time: f64,
}

/// Aggregated results plus a record of repetitions that failed (these are
/// excluded from the aggregates but never silently dropped).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub failures: Vec<String>,
}

const REPORT_HEADER: &str = "dataset,attack,defence,alpha,fraction,mean_test_error,std_test_error,mean_removed_poison_fraction,mean_removed_genuine_fraction,wall_time";

/// Fixed-width float formatting: 6 significant digits, exponent notation,
/// so every emitted value reparses exactly.
fn fmt6(v: f64) -> String {
    format!("{v:.5e}")
}

impl ExperimentReport {
    /// Rows sorted by the deterministic report order.
    pub fn sorted(mut self) -> Self {
        self.rows.sort_by(|a, b| {
            (a.attack.as_str(), a.defence.as_str(), a.alpha, a.fraction)
                .partial_cmp(&(b.attack.as_str(), b.defence.as_str(), b.alpha, b.fraction))
                .expect("report keys contain no NaN")
        });
        self
    }

    /// Render the CSV (header plus one line per row, sorted).
    pub fn to_csv(&self) -> String {
        let sorted = self.clone().sorted();
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &sorted.rows {
            let alpha = r.alpha.map(fmt6).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.dataset,
                r.attack,
                r.defence,
                alpha,
                fmt6(r.fraction),
                fmt6(r.mean_test_error),
                fmt6(r.std_test_error),
                fmt6(r.mean_removed_poison_fraction),
                fmt6(r.mean_removed_genuine_fraction),
                fmt6(r.wall_time),
            ));
        }
        out
    }
}

/// Write the report CSV.
pub fn emit_report(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, report.to_csv())?;
    Ok(())
}

/// Parse a CSV produced by [`emit_report`] (used for round-trip checks and
/// downstream tooling).
pub fn parse_report_csv(text: &str) -> Result<ExperimentReport> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == REPORT_HEADER => {}
        other => {
            return Err(Error::MalformedData {
                path: "<report csv>".into(),
                record: 1,
                msg: format!("unexpected header {other:?}"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::MalformedData {
                path: "<report csv>".into(),
                record: i + 2,
                msg: format!("expected 10 fields, got {}", fields.len()),
            });
        }
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::MalformedData {
                path: "<report csv>".into(),
                record: i + 2,
                msg: format!("bad float {s:?}"),
            })
        };
        rows.push(ReportRow {
            dataset: fields[0].to_string(),
            attack: fields[1].to_string(),
            defence: fields[2].to_string(),
            alpha: if fields[3].is_empty() {
                None
            } else {
                Some(num(fields[3])?)
            },
            fraction: num(fields[4])?,
            mean_test_error: num(fields[5])?,
            std_test_error: num(fields[6])?,
            mean_removed_poison_fraction: num(fields[7])?,
            mean_removed_genuine_fraction: num(fields[8])?,
            wall_time: num(fields[9])?,
        });
    }
    Ok(ExperimentReport {
        rows,
        failures: Vec::new(),
    })
}

/// Write the fully resolved config (all serde defaults expanded) plus the
/// failure log as the run's provenance sidecar.
pub fn emit_resolved_config(
    config: &ExperimentConfig,
    failures: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    #[derive(Serialize)]
    struct Sidecar<'a> {
        config: &'a ExperimentConfig,
        failures: &'a [String],
    }
    let text = serde_json::to_string_pretty(&Sidecar { config, failures })?;
    std::fs::write(path, text)?;
    Ok(())
}

fn load_pool(spec: &DatasetSpec) -> Result<LabeledDataset> {
    match spec {
        DatasetSpec::Synthetic { gaussian } => gen_gaussian_binary(gaussian),
        DatasetSpec::Spambase { path } => load_spambase(path),
        DatasetSpec::Mnist17 { images, labels } => load_mnist_1v7(images, labels),
    }
}

/// Whether the attack/defence pair has randomness beyond the split, i.e.
/// whether extra inner repetitions are meaningful.
fn pipeline_is_random(attack: &AttackSpec, defence: &DefenceSpec) -> bool {
    matches!(attack, AttackSpec::Rlf { .. })
        || matches!(
            defence,
            DefenceSpec::Detector { scorer, .. }
                if matches!(scorer.kind, ScorerKind::SampledKnn | ScorerKind::Sp)
        )
}

struct RepOutcome {
    test_error: f64,
    removed_poison_fraction: f64,
    removed_genuine_fraction: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn sorted_intersection_count(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

fn cv_lambda_for(data: &LabeledDataset, folds: usize) -> Result<f64> {
    cv_lambda(data, folds, &default_lambda_grid(data)?)
}

/// One (split, inner-repetition) cell of the experiment.
fn run_single(
    cfg: &ExperimentConfig,
    parts: &DatasetSplit,
    fraction: f64,
    split_seed: u64,
    inner: u64,
) -> Result<RepOutcome> {
    let train = &parts.train;
    let n = train.len();
    let budget = ((fraction * n as f64).round() as usize).min(n);
    let rep_tag = rng::mix_seed(split_seed, inner);

    // Penalty on the clean training set: the fallback for every policy and
    // the model the informed attacks rank with.
    let clean_lambda = match &cfg.lambda_policy {
        LambdaPolicy::Fixed { lambda } => *lambda,
        LambdaPolicy::CvOnWarmStart { folds } => cv_lambda_for(train, *folds)?,
    };

    // Attack stage: the poisoned training set, the indices of malicious
    // rows within it, and the penalty the final training uses.
    let (poisoned, malicious, lambda) = match &cfg.attack {
        AttackSpec::None => (train.clone(), Vec::new(), clean_lambda),
        AttackSpec::Optimal {
            box_low,
            box_high,
            epsilon,
            max_outer_iters,
            gs_tol,
            round_binary,
            target_mode,
        } => {
            let lambda = match &cfg.lambda_policy {
                LambdaPolicy::Fixed { .. } => clean_lambda,
                LambdaPolicy::CvOnWarmStart { folds } => {
                    // "Warm start" = the initial poison placement; CV runs
                    // on the training set carrying those points.
                    let init = choose_initial_points(train, budget, clean_lambda, *target_mode)?;
                    let warm = train.concat(&init.to_dataset())?;
                    cv_lambda_for(&warm, *folds)?
                }
            };
            let attack_cfg = AttackConfig {
                q: budget,
                epsilon: *epsilon,
                box_low: vec![*box_low; train.dim()],
                box_high: vec![*box_high; train.dim()],
                max_outer_iters: *max_outer_iters,
                gs_tol: *gs_tol,
                round_binary: *round_binary,
                target_mode: *target_mode,
            };
            let out = run_optimal_attack(train, &parts.val, &attack_cfg, lambda)?;
            let poisoned = train.concat(&out.poison.to_dataset())?;
            let malicious: Vec<usize> = (n..n + out.poison.len()).collect();
            (poisoned, malicious, lambda)
        }
        AttackSpec::Rlf { seed } => {
            let out = rlf(
                train,
                &FlipSpec {
                    fraction,
                    seed: rng::mix_seed(rng::mix_seed(*seed, rep_tag), 1),
                },
            )?;
            let lambda = match &cfg.lambda_policy {
                LambdaPolicy::Fixed { .. } => clean_lambda,
                LambdaPolicy::CvOnWarmStart { folds } => cv_lambda_for(&out.data, *folds)?,
            };
            (out.data, out.flipped, lambda)
        }
        AttackSpec::Ilf => {
            let out = ilf(train, clean_lambda, fraction)?;
            let lambda = match &cfg.lambda_policy {
                LambdaPolicy::Fixed { .. } => clean_lambda,
                LambdaPolicy::CvOnWarmStart { folds } => cv_lambda_for(&out.data, *folds)?,
            };
            (out.data, out.flipped, lambda)
        }
    };

    // Defence stage: the final model plus whatever got removed.
    let (model, removed): (LinearClassifier, Vec<usize>) = match &cfg.defence {
        DefenceSpec::None => (
            train_lasso(&poisoned, &TrainConfig::with_lambda(lambda))?,
            Vec::new(),
        ),
        DefenceSpec::Detector { scorer, alpha } => {
            let mut per_rep = scorer.clone();
            per_rep.seed = rng::mix_seed(rng::mix_seed(scorer.seed, rep_tag), 2);
            let defence = fit_defence(&parts.od_train, &per_rep, *alpha)?;
            let (kept, removed) = defence.filter(&poisoned)?;
            (
                train_lasso(&kept, &TrainConfig::with_lambda(lambda))?,
                removed,
            )
        }
        DefenceSpec::Rls {
            learning_rate,
            iters,
            folds,
            grid,
        } => {
            let candidates = match grid {
                NoiseGrid::Symmetric => default_noise_grid(),
                NoiseGrid::Full => full_noise_grid(),
                NoiseGrid::Auto => {
                    if matches!(cfg.attack, AttackSpec::Rlf { .. }) {
                        default_noise_grid()
                    } else {
                        full_noise_grid()
                    }
                }
            };
            let rates = cv_noise_rates(&poisoned, *folds, &candidates, *learning_rate, *iters)?;
            let model = train_rls(
                &poisoned,
                &RlsConfig {
                    rates,
                    learning_rate: *learning_rate,
                    iters: *iters,
                },
            )?;
            (model, Vec::new())
        }
    };

    let removed_poison = sorted_intersection_count(&removed, &malicious);
    let removed_genuine = removed.len() - removed_poison;
    let genuine_total = poisoned.len() - malicious.len();
    Ok(RepOutcome {
        test_error: test_error(&model, &parts.test)?,
        removed_poison_fraction: ratio(removed_poison, malicious.len()),
        removed_genuine_fraction: ratio(removed_genuine, genuine_total),
    })
}

fn validate_config(cfg: &ExperimentConfig, pool: &LabeledDataset) -> Result<()> {
    if cfg.repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be >= 1".into()));
    }
    if cfg.inner_repetitions == 0 {
        return Err(Error::InvalidConfig("inner_repetitions must be >= 1".into()));
    }
    if cfg.poison_fractions.is_empty() {
        return Err(Error::InvalidConfig("poison_fractions is empty".into()));
    }
    for &f in &cfg.poison_fractions {
        if !(f.is_finite() && (0.0..=1.0).contains(&f)) {
            return Err(Error::InvalidConfig(format!(
                "poison fraction {f} outside [0, 1]"
            )));
        }
    }
    let spoken_for = cfg.split.n_train + cfg.split.n_od_train + cfg.split.n_val;
    if spoken_for >= pool.len() {
        return Err(Error::InfeasibleSplit {
            requested: spoken_for + 1,
            available: pool.len(),
        });
    }
    Ok(())
}

/// Run the configured experiment: one report row per poisoning fraction,
/// aggregated over `repetitions` splits (times `inner_repetitions` for
/// pipelines with their own randomness). Failed repetitions are warned to
/// stderr, listed in the report's failure log, and excluded from the
/// aggregates.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let pool = load_pool(&cfg.dataset)?;
    validate_config(cfg, &pool)?;
    let inner_runs = if pipeline_is_random(&cfg.attack, &cfg.defence) {
        cfg.inner_repetitions
    } else {
        1
    };

    let mut report = ExperimentReport::default();
    for &fraction in &cfg.poison_fractions {
        let started = Instant::now();
        let mut outcomes: Vec<RepOutcome> = Vec::new();
        for r in 0..cfg.repetitions {
            let split_seed = cfg.base_seed.wrapping_add(r as u64);
            let spec = SplitSpec {
                seed: split_seed,
                ..cfg.split.clone()
            };
            let parts = split(&pool, &spec)?;
            for inner in 0..inner_runs {
                match run_single(cfg, &parts, fraction, split_seed, inner as u64) {
                    Ok(out) => outcomes.push(out),
                    Err(e) => {
                        let line = format!(
                            "fraction={fraction} repetition={r} inner={inner}: {e}"
                        );
                        eprintln!("warning: repetition failed: {line}");
                        report.failures.push(line);
                    }
                }
            }
        }
        if outcomes.is_empty() {
            report.failures.push(format!(
                "fraction={fraction}: every repetition failed; row omitted"
            ));
            continue;
        }
        let m = outcomes.len() as f64;
        let mean_err = outcomes.iter().map(|o| o.test_error).sum::<f64>() / m;
        let std_err = if outcomes.len() < 2 {
            0.0
        } else {
            (outcomes
                .iter()
                .map(|o| (o.test_error - mean_err).powi(2))
                .sum::<f64>()
                / (m - 1.0))
                .sqrt()
        };
        report.rows.push(ReportRow {
            dataset: cfg.dataset.name().to_string(),
            attack: cfg.attack.name().to_string(),
            defence: cfg.defence.name(),
            alpha: cfg.defence.alpha(),
            fraction,
            mean_test_error: mean_err,
            std_test_error: std_err,
            mean_removed_poison_fraction: outcomes
                .iter()
                .map(|o| o.removed_poison_fraction)
                .sum::<f64>()
                / m,
            mean_removed_genuine_fraction: outcomes
                .iter()
                .map(|o| o.removed_genuine_fraction)
                .sum::<f64>()
                / m,
            wall_time: started.elapsed().as_secs_f64(),
        });
    }
    Ok(report.sorted())
}

/// Settings of the 2-D single-point trajectory demo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Fig1Config {
    /// The training blobs (must be 2-D).
    pub gaussian: GaussianSpec,
    /// Validation draw per class from the same blobs.
    pub n_val_per_class: usize,
    pub val_seed: u64,
    pub lambda: f64,
    pub box_low: f64,
    pub box_high: f64,
    pub epsilon: f64,
    pub max_outer_iters: usize,
    pub gs_tol: f64,
    pub target_mode: TargetMode,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Fig1Config {
            gaussian: GaussianSpec {
                mean_pos: vec![1.5, 0.0],
                mean_neg: vec![-1.5, 0.0],
                cov_scale: 0.6,
                n_per_class: 25,
                seed: 7,
            },
            n_val_per_class: 5000,
            val_seed: 8,
            lambda: 0.01,
            box_low: -4.0,
            box_high: 4.0,
            epsilon: 1e-5,
            max_outer_iters: 50,
            gs_tol: 1e-3,
            target_mode: TargetMode::Alternate,
        }
    }
}

/// One step of the demo trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    /// 0 is the initial placement; then one row per outer sweep.
    pub iter: usize,
    pub x1: f64,
    pub x2: f64,
    pub objective: f64,
}

/// Everything the trajectory demo produces: the path of the single
/// poisoning point plus the clean and poisoned decision boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDemo {
    pub rows: Vec<TrajectoryRow>,
    pub lambda: f64,
    pub poison_label: f64,
    pub clean_model: LinearClassifier,
    pub poisoned_model: LinearClassifier,
    pub clean_objective: f64,
    pub final_objective: f64,
    pub converged: bool,
}

/// Run the single-point attack on 2-D blobs and record the point's path.
pub fn run_trajectory_demo(cfg: &Fig1Config) -> Result<TrajectoryDemo> {
    if cfg.gaussian.mean_pos.len() != 2 || cfg.gaussian.mean_neg.len() != 2 {
        return Err(Error::InvalidConfig(format!(
            "the trajectory demo is 2-D only, got means of length {} and {}",
            cfg.gaussian.mean_pos.len(),
            cfg.gaussian.mean_neg.len()
        )));
    }
    let train = gen_gaussian_binary(&cfg.gaussian)?;
    let val = gen_gaussian_binary(&GaussianSpec {
        n_per_class: cfg.n_val_per_class,
        seed: cfg.val_seed,
        ..cfg.gaussian.clone()
    })?;
    let clean_model = train_lasso(&train, &TrainConfig::with_lambda(cfg.lambda))?;
    let clean_objective = half_mse(&clean_model, &val)?;

    let attack_cfg = AttackConfig {
        q: 1,
        epsilon: cfg.epsilon,
        box_low: vec![cfg.box_low; 2],
        box_high: vec![cfg.box_high; 2],
        max_outer_iters: cfg.max_outer_iters,
        gs_tol: cfg.gs_tol,
        round_binary: false,
        target_mode: cfg.target_mode,
    };
    let out = run_optimal_attack(&train, &val, &attack_cfg, cfg.lambda)?;

    // Reconstruct the initial placement the attack started from (the same
    // deterministic selection, projected into the box).
    let init = choose_initial_points(&train, 1, cfg.lambda, cfg.target_mode)?;
    let start = crate::attack_optimal::project_box(init.point(0), &attack_cfg);
    let mut rows = vec![TrajectoryRow {
        iter: 0,
        x1: start[0],
        x2: start[1],
        objective: out.initial_objective,
    }];
    for (row, pos) in out.trace.iter().zip(&out.point_trace) {
        rows.push(TrajectoryRow {
            iter: row.outer_iter,
            x1: pos[0],
            x2: pos[1],
            objective: row.objective,
        });
    }
    Ok(TrajectoryDemo {
        rows,
        lambda: cfg.lambda,
        poison_label: out.poison.label(0),
        clean_model,
        poisoned_model: out.model.clone(),
        clean_objective,
        final_objective: out.objective,
        converged: out.converged,
    })
}

/// Write the demo path as CSV (`iter,x1,x2,objective`).
pub fn emit_trajectory_csv(demo: &TrajectoryDemo, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("iter,x1,x2,objective\n");
    for r in &demo.rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.iter,
            fmt6(r.x1),
            fmt6(r.x2),
            fmt6(r.objective)
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write the demo's boundary parameters and objectives as JSON.
pub fn emit_trajectory_summary(demo: &TrajectoryDemo, path: impl AsRef<Path>) -> Result<()> {
    #[derive(Serialize)]
    struct Summary<'a> {
        lambda: f64,
        poison_label: f64,
        clean_model: &'a LinearClassifier,
        poisoned_model: &'a LinearClassifier,
        clean_objective: f64,
        final_objective: f64,
        converged: bool,
    }
    let text = serde_json::to_string_pretty(&Summary {
        lambda: demo.lambda,
        poison_label: demo.poison_label,
        clean_model: &demo.clean_model,
        poisoned_model: &demo.poisoned_model,
        clean_objective: demo.clean_objective,
        final_objective: demo.final_objective,
        converged: demo.converged,
    })?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(attack: AttackSpec, defence: DefenceSpec) -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetSpec::Synthetic {
                gaussian: GaussianSpec {
                    mean_pos: vec![1.5, 0.0],
                    mean_neg: vec![-1.5, 0.0],
                    cov_scale: 0.6,
                    n_per_class: 60,
                    seed: 3,
                },
            },
            split: SplitSpec {
                n_train: 40,
                n_od_train: 30,
                n_val: 20,
                seed: 0,
            },
            attack,
            poison_fractions: vec![0.0, 0.1],
            defence,
            repetitions: 2,
            inner_repetitions: 1,
            base_seed: 11,
            lambda_policy: LambdaPolicy::Fixed { lambda: 0.01 },
        }
    }

    #[test]
    fn config_json_fills_defaults() {
        let text = r#"{
            "dataset": {"kind": "synthetic", "mean_pos": [1.0, 0.0], "mean_neg": [-1.0, 0.0],
                        "cov_scale": 0.5, "n_per_class": 10, "seed": 1},
            "split": {"n_train": 8, "n_od_train": 4, "n_val": 4},
            "attack": {"kind": "rlf"},
            "defence": {"kind": "rls"},
            "lambda_policy": {"kind": "fixed", "lambda": 0.0}
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.poison_fractions, vec![0.0, 0.05, 0.10, 0.15, 0.20]);
        assert_eq!(cfg.repetitions, 1);
        assert_eq!(cfg.base_seed, 0);
        match cfg.defence {
            DefenceSpec::Rls {
                learning_rate,
                iters,
                folds,
                grid,
            } => {
                assert_eq!(learning_rate, 0.1);
                assert_eq!(iters, 1000);
                assert_eq!(folds, 5);
                assert_eq!(grid, NoiseGrid::Auto);
            }
            other => panic!("unexpected defence {other:?}"),
        }
        // Round-trips through JSON.
        let again: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn report_csv_round_trips_and_sorts() {
        let report = ExperimentReport {
            rows: vec![
                ReportRow {
                    dataset: "synthetic".into(),
                    attack: "rlf".into(),
                    defence: "knn".into(),
                    alpha: Some(0.99),
                    fraction: 0.2,
                    mean_test_error: 0.123456789,
                    std_test_error: 0.01,
                    mean_removed_poison_fraction: 0.875,
                    mean_removed_genuine_fraction: 0.0375,
                    wall_time: 1.25,
                },
                ReportRow {
                    dataset: "synthetic".into(),
                    attack: "rlf".into(),
                    defence: "knn".into(),
                    alpha: Some(0.99),
                    fraction: 0.05,
                    mean_test_error: 0.08,
                    std_test_error: 0.0,
                    mean_removed_poison_fraction: 0.9,
                    mean_removed_genuine_fraction: 0.04,
                    wall_time: 0.5,
                },
            ],
            failures: Vec::new(),
        };
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), REPORT_HEADER);
        // Sorted by fraction within the same attack/defence/alpha.
        assert!(lines.next().unwrap().contains("5.00000e-2"));
        assert!(lines.next().unwrap().contains("2.00000e-1"));

        let parsed = parse_report_csv(&csv).unwrap();
        assert_eq!(parsed.rows.len(), 2);
        assert_eq!(parsed.to_csv(), csv, "re-emission must be byte-identical");

        let empty = ExperimentReport::default();
        assert_eq!(empty.to_csv(), format!("{REPORT_HEADER}\n"));
        assert!(parse_report_csv(&empty.to_csv()).unwrap().rows.is_empty());
    }

    #[test]
    fn alpha_column_is_empty_without_a_detector() {
        let report = ExperimentReport {
            rows: vec![ReportRow {
                dataset: "synthetic".into(),
                attack: "none".into(),
                defence: "none".into(),
                alpha: None,
                fraction: 0.0,
                mean_test_error: 0.1,
                std_test_error: 0.0,
                mean_removed_poison_fraction: 0.0,
                mean_removed_genuine_fraction: 0.0,
                wall_time: 0.0,
            }],
            failures: Vec::new(),
        };
        let line = report.to_csv().lines().nth(1).unwrap().to_string();
        assert!(line.starts_with("synthetic,none,none,,0.00000e0,"));
        let parsed = parse_report_csv(&report.to_csv()).unwrap();
        assert_eq!(parsed.rows[0].alpha, None);
    }

    #[test]
    fn baseline_run_produces_sane_rows() {
        let mut cfg = tiny_config(AttackSpec::None, DefenceSpec::None);
        cfg.poison_fractions = vec![0.0];
        let report = run_experiment(&cfg).unwrap();
        assert!(report.failures.is_empty());
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_eq!(
            (row.dataset.as_str(), row.attack.as_str(), row.defence.as_str()),
            ("synthetic", "none", "none")
        );
        assert!((0.0..=1.0).contains(&row.mean_test_error));
        assert_eq!(row.mean_removed_poison_fraction, 0.0);
        assert_eq!(row.mean_removed_genuine_fraction, 0.0);
        assert!(row.std_test_error >= 0.0);
    }

    #[test]
    fn reports_are_deterministic_modulo_wall_time() {
        let cfg = tiny_config(
            AttackSpec::Rlf { seed: 5 },
            DefenceSpec::Detector {
                scorer: ScorerConfig {
                    k: 3,
                    s: 10,
                    ..ScorerConfig::new(ScorerKind::SampledKnn)
                },
                alpha: 0.9,
            },
        );
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        for (x, y) in a.rows.iter().zip(&b.rows) {
            let mut x = x.clone();
            let mut y = y.clone();
            x.wall_time = 0.0;
            y.wall_time = 0.0;
            assert_eq!(x, y);
        }
    }

    #[test]
    fn flipping_with_detector_defence_accounts_for_removals() {
        let cfg = tiny_config(
            AttackSpec::Rlf { seed: 5 },
            DefenceSpec::Detector {
                scorer: ScorerConfig {
                    k: 3,
                    ..ScorerConfig::new(ScorerKind::Knn)
                },
                alpha: 0.9,
            },
        );
        let report = run_experiment(&cfg).unwrap();
        assert!(report.failures.is_empty(), "{:?}", report.failures);
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert!((0.0..=1.0).contains(&row.mean_removed_poison_fraction));
            assert!((0.0..=1.0).contains(&row.mean_removed_genuine_fraction));
        }
        // The zero-fraction row has no malicious points by definition.
        assert_eq!(report.rows[0].fraction, 0.0);
        assert_eq!(report.rows[0].mean_removed_poison_fraction, 0.0);
    }

    #[test]
    fn rls_defence_path_runs() {
        let mut cfg = tiny_config(
            AttackSpec::Rlf { seed: 5 },
            DefenceSpec::Rls {
                learning_rate: 0.1,
                iters: 120,
                folds: 4,
                grid: NoiseGrid::Auto,
            },
        );
        cfg.poison_fractions = vec![0.1];
        cfg.repetitions = 1;
        let report = run_experiment(&cfg).unwrap();
        assert!(report.failures.is_empty(), "{:?}", report.failures);
        let row = &report.rows[0];
        assert_eq!(row.defence, "rls");
        assert_eq!(row.alpha, None);
        assert_eq!(row.mean_removed_poison_fraction, 0.0);
        assert!((0.0..=1.0).contains(&row.mean_test_error));
    }

    #[test]
    fn defence_none_equals_direct_training_on_the_poisoned_set() {
        // Reproduce one repetition by hand and compare with the harness.
        let mut cfg = tiny_config(AttackSpec::Ilf, DefenceSpec::None);
        cfg.poison_fractions = vec![0.2];
        cfg.repetitions = 1;
        let report = run_experiment(&cfg).unwrap();

        let pool = load_pool(&cfg.dataset).unwrap();
        let parts = split(
            &pool,
            &SplitSpec {
                seed: cfg.base_seed,
                ..cfg.split.clone()
            },
        )
        .unwrap();
        let flipped = ilf(&parts.train, 0.01, 0.2).unwrap();
        let model = train_lasso(&flipped.data, &TrainConfig::with_lambda(0.01)).unwrap();
        let expect = test_error(&model, &parts.test).unwrap();
        assert_eq!(report.rows[0].mean_test_error, expect);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = tiny_config(AttackSpec::None, DefenceSpec::None);
        cfg.repetitions = 0;
        assert!(run_experiment(&cfg).is_err());

        let mut cfg = tiny_config(AttackSpec::None, DefenceSpec::None);
        cfg.poison_fractions = vec![1.5];
        assert!(run_experiment(&cfg).is_err());

        // Split that consumes the whole pool leaves no test rows.
        let mut cfg = tiny_config(AttackSpec::None, DefenceSpec::None);
        cfg.split = SplitSpec {
            n_train: 60,
            n_od_train: 40,
            n_val: 20,
            seed: 0,
        };
        assert!(matches!(
            run_experiment(&cfg),
            Err(Error::InfeasibleSplit { .. })
        ));
    }

    #[test]
    fn failed_repetitions_are_recorded_not_hidden() {
        // A detector whose sample size exceeds the trusted class size
        // fails to fit on every repetition: the run still returns, with
        // the failures logged and no aggregate rows fabricated.
        let cfg = tiny_config(
            AttackSpec::None,
            DefenceSpec::Detector {
                scorer: ScorerConfig {
                    k: 3,
                    s: 500,
                    ..ScorerConfig::new(ScorerKind::SampledKnn)
                },
                alpha: 0.9,
            },
        );
        let report = run_experiment(&cfg).unwrap();
        assert!(report.rows.is_empty());
        assert!(!report.failures.is_empty());
        assert!(report.failures.iter().any(|f| f.contains("fraction=0")));
    }

    #[test]
    fn trajectory_demo_rejects_non_planar_data() {
        let mut cfg = Fig1Config::default();
        cfg.gaussian.mean_pos = vec![1.0, 0.0, 0.0];
        cfg.gaussian.mean_neg = vec![-1.0, 0.0, 0.0];
        assert!(matches!(
            run_trajectory_demo(&cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn trajectory_demo_traces_a_monotone_path() {
        let cfg = Fig1Config {
            n_val_per_class: 150,
            max_outer_iters: 4,
            ..Fig1Config::default()
        };
        let demo = run_trajectory_demo(&cfg).unwrap();
        assert!(demo.rows.len() <= cfg.max_outer_iters + 1);
        assert_eq!(demo.rows[0].iter, 0);
        let mut prev = f64::NEG_INFINITY;
        for row in &demo.rows {
            assert!(row.objective >= prev);
            prev = row.objective;
            for v in [row.x1, row.x2] {
                assert!((cfg.box_low..=cfg.box_high).contains(&v));
            }
        }
        // The last trace row and the reported final objective agree, and
        // the path gained at least as much as it started with.
        assert_eq!(demo.rows.last().unwrap().objective, demo.final_objective);
        assert!(demo.final_objective >= demo.rows[0].objective);
        assert!(demo.clean_objective > 0.0);
        assert!(demo.rows.len() >= 2, "the attack never traced a sweep");
    }
}
