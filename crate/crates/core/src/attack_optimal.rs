//! Gradient-based poisoning of lasso-trained linear classifiers.
//!
//! The attacker appends `q` crafted points to the training set and moves
//! their features to maximize the trained model's validation half-MSE. The
//! dependence of the objective on a poisoning point runs *through the
//! trained weights*, so the gradient is obtained implicitly: the trainer's
//! stationarity conditions define the weights as a function of the point,
//! and differentiating them yields a symmetric linear system whose solution
//! gives the Jacobian. Points are optimized one at a time by projected
//! gradient ascent with a golden-section line search, retraining the model
//! before every gradient so the stationarity assumption actually holds.
//!
//! The module exposes the individual steps (initial-point selection,
//! implicit gradient, box projection, line search) as well as the full
//! attack loop, which records a per-update trace with an exactly
//! non-decreasing objective column.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::linear_model::{dot, half_mse, train_lasso, train_lasso_warm, LinearClassifier, TrainConfig};

/// Condition-number ceiling beyond which the implicit system is treated as
/// degenerate rather than solved.
const COND_LIMIT: f64 = 1e12;

/// How the attacker assigns the (fixed) labels of the poisoning points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Labels alternate +1, -1, +1, ... so both classes are poisoned.
    #[default]
    Alternate,
    AllPositive,
    AllNegative,
}

/// The attacker's points: a `q x d` feature block plus target labels that
/// never change once assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct PoisonSet {
    points: Vec<f64>,
    labels: Vec<f64>,
    d: usize,
}

impl PoisonSet {
    /// A poison set with no points (still carries the feature dimension).
    pub fn empty(d: usize) -> Self {
        PoisonSet {
            points: Vec::new(),
            labels: Vec::new(),
            d,
        }
    }

    /// Build from explicit rows and labels.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        let q = rows.len();
        if labels.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: labels.len(),
            });
        }
        let d = rows.first().map_or(0, |r| r.len());
        let mut points = Vec::with_capacity(q * d);
        for row in &rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            points.extend_from_slice(row);
        }
        for (i, &y) in labels.iter().enumerate() {
            if y != 1.0 && y != -1.0 {
                return Err(Error::InvalidLabel { index: i, value: y });
            }
        }
        Ok(PoisonSet { points, labels, d })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.d..(j + 1) * self.d]
    }

    pub fn label(&self, j: usize) -> f64 {
        self.labels[j]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Overwrite point `j`'s features (labels are immutable by design).
    pub fn set_point(&mut self, j: usize, row: &[f64]) -> Result<()> {
        if row.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: row.len(),
            });
        }
        self.points[j * self.d..(j + 1) * self.d].copy_from_slice(row);
        Ok(())
    }

    /// View the poison block as a labeled dataset (for concatenation with
    /// the genuine training set).
    pub fn to_dataset(&self) -> LabeledDataset {
        LabeledDataset::from_flat(self.len(), self.d, self.points.clone(), self.labels.clone())
            .expect("poison set is internally consistent")
    }
}

/// Attack settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Number of poisoning points to craft.
    pub q: usize,
    /// Outer-loop convergence tolerance on the objective change.
    pub epsilon: f64,
    /// Componentwise lower corner of the feasible box.
    pub box_low: Vec<f64>,
    /// Componentwise upper corner of the feasible box.
    pub box_high: Vec<f64>,
    /// Hard cap on outer sweeps over the poison set.
    pub max_outer_iters: usize,
    /// Golden-section bracket width at which the line search stops.
    pub gs_tol: f64,
    /// Round features to {0, 1} after the optimization (binary datasets).
    pub round_binary: bool,
    /// Label assignment of the crafted points.
    pub target_mode: TargetMode,
}

impl AttackConfig {
    /// Settings with the same `[low, high]` interval in every coordinate.
    pub fn uniform_box(q: usize, low: f64, high: f64, d: usize) -> Self {
        AttackConfig {
            q,
            epsilon: 1e-5,
            box_low: vec![low; d],
            box_high: vec![high; d],
            max_outer_iters: 50,
            gs_tol: 1e-3,
            round_binary: false,
            target_mode: TargetMode::Alternate,
        }
    }

    // The negated comparisons also reject NaN bounds and tolerances, which
    // the un-negated forms would silently accept.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn validate(&self, d: usize) -> Result<()> {
        if self.box_low.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.box_low.len(),
            });
        }
        if self.box_high.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.box_high.len(),
            });
        }
        for j in 0..d {
            if !(self.box_low[j] <= self.box_high[j]) {
                return Err(Error::InvalidConfig(format!(
                    "box_low[{j}] = {} exceeds box_high[{j}] = {}",
                    self.box_low[j], self.box_high[j]
                )));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.gs_tol > 0.0 && self.gs_tol < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gs_tol must lie in (0, 1), got {}",
                self.gs_tol
            )));
        }
        Ok(())
    }
}

/// One line of the attack trace: the objective after updating one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Outer sweep number, starting at 1.
    pub outer_iter: usize,
    /// Index of the poison point that was updated.
    pub point_index: usize,
    /// Accepted line-search step (0 when no improving step existed).
    pub eta: f64,
    /// Validation half-MSE after the update.
    pub objective: f64,
}

/// Result of a full attack run.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    /// The crafted points (labels unchanged from initialization).
    pub poison: PoisonSet,
    /// Model trained on `train` plus the final poison set.
    pub model: LinearClassifier,
    /// One row per point update; the objective column never decreases.
    pub trace: Vec<TraceRow>,
    /// Position of the updated point after each trace row (parallel to
    /// `trace`) — feeds trajectory plots.
    pub point_trace: Vec<Vec<f64>>,
    /// Validation half-MSE of the initial poison placement.
    pub initial_objective: f64,
    /// Final validation half-MSE.
    pub objective: f64,
    /// Whether the outer loop met `epsilon` before `max_outer_iters`.
    pub converged: bool,
}

/// Sums over the poisoned training set that the implicit system is built
/// from: the scatter matrix `sigma = sum_i x_i x_i^T`, the feature sum
/// `mu = sum_i x_i`, and the row count.
#[derive(Debug, Clone)]
pub struct GradientWorkspace {
    sigma: DMatrix<f64>,
    mu: DVector<f64>,
    n: usize,
}

impl GradientWorkspace {
    pub fn new(data: &LabeledDataset) -> Self {
        let d = data.dim();
        let mut sigma = DMatrix::zeros(d, d);
        let mut mu = DVector::zeros(d);
        for (x, _) in data.iter() {
            for i in 0..d {
                mu[i] += x[i];
                for j in i..d {
                    sigma[(i, j)] += x[i] * x[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                sigma[(i, j)] = sigma[(j, i)];
            }
        }
        GradientWorkspace { sigma, mu, n: data.len() }
    }
}

/// 1-norm condition estimate of the factored matrix: exact `||A||_1` times
/// Hager's lower-bound estimate of `||A^-1||_1` driven by the existing
/// factorization (no explicit inverse).
fn condition_estimate(h: &DMatrix<f64>, chol: &Cholesky<f64, Dyn>) -> f64 {
    let m = h.nrows();
    let norm_a = (0..m)
        .map(|j| h.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut x = DVector::from_element(m, 1.0 / m as f64);
    let mut est = 0.0;
    for sweep in 0..5 {
        let y = chol.solve(&x);
        let e: f64 = y.iter().map(|v| v.abs()).sum();
        if sweep > 0 && e <= est {
            break;
        }
        est = e;
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        // A is symmetric, so the transpose solve reuses the factorization.
        let z = chol.solve(&xi);
        let (jmax, zmax) = z
            .iter()
            .enumerate()
            .fold((0, 0.0), |(bj, bv), (j, &v)| {
                if v.abs() > bv {
                    (j, v.abs())
                } else {
                    (bj, bv)
                }
            });
        if zmax <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(m);
        x[jmax] = 1.0;
    }
    norm_a * est
}

/// Gradient of the validation half-MSE with respect to the features of
/// poison point `point_index`, holding its label fixed.
///
/// `model` must be the trained minimizer on `train_plus_poison` (retrain
/// before every call). The trainer's stationarity conditions are
/// differentiated on the support `{j : w_j != 0}` plus the bias — the sign
/// pattern is treated as locally constant — giving the reduced symmetric
/// system
///
/// ```text
///   [ sigma_AA  mu_A ] [ dw_A/dx_p ]     [ M_A  ]
///   [ mu_A^T    n    ] [ db/dx_p   ] = - [ w^T  ]
/// ```
///
/// with `M = x_p w^T + (w·x_p + b - y_p) I`. The system is solved (never
/// inverted) by a Cholesky factorization, once, against the validation
/// residual vector; coordinates off the support get gradient zero.
///
/// Errors with a degenerate-Hessian report when the factorization fails or
/// the estimated condition number exceeds `1e12`.
pub fn poison_gradient(
    point_index: usize,
    poison: &PoisonSet,
    model: &LinearClassifier,
    train_plus_poison: &LabeledDataset,
    val: &LabeledDataset,
) -> Result<Vec<f64>> {
    let d = poison.dim();
    if point_index >= poison.len() {
        return Err(Error::InvalidConfig(format!(
            "poison point {point_index} out of range (q = {})",
            poison.len()
        )));
    }
    if train_plus_poison.dim() != d || val.dim() != d || model.w.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: train_plus_poison.dim(),
        });
    }
    if val.is_empty() {
        return Err(Error::EmptyDataset("validation set for the attack".into()));
    }
    let ws = GradientWorkspace::new(train_plus_poison);

    let active: Vec<usize> = (0..d).filter(|&j| model.w[j] != 0.0).collect();
    let k = active.len();
    let mut h = DMatrix::zeros(k + 1, k + 1);
    for (a, &ja) in active.iter().enumerate() {
        for (bb, &jb) in active.iter().enumerate() {
            h[(a, bb)] = ws.sigma[(ja, jb)];
        }
        h[(a, k)] = ws.mu[ja];
        h[(k, a)] = ws.mu[ja];
    }
    h[(k, k)] = ws.n as f64;

    // Validation-side gradient of the objective w.r.t. (w_A, b).
    let mut gv = DVector::zeros(k + 1);
    for (x, y) in val.iter() {
        let r = dot(&model.w, x) + model.b - y;
        for (a, &ja) in active.iter().enumerate() {
            gv[a] += r * x[ja];
        }
        gv[k] += r;
    }
    gv /= val.len() as f64;

    let chol = h.clone().cholesky().ok_or(Error::DegenerateHessian {
        cond: f64::INFINITY,
    })?;
    let cond = condition_estimate(&h, &chol);
    if cond > COND_LIMIT {
        return Err(Error::DegenerateHessian { cond });
    }
    // Adjoint trick: one solve against the validation gradient replaces the
    // full (k+1) x d Jacobian.
    let z = chol.solve(&gv);

    let xp = poison.point(point_index);
    let rp = dot(&model.w, xp) + model.b - poison.label(point_index);
    let xz: f64 = active.iter().enumerate().map(|(a, &ja)| xp[ja] * z[a]).sum();
    let zb = z[k];
    let mut grad = vec![0.0; d];
    for (a, &ja) in active.iter().enumerate() {
        grad[ja] = -((xz + zb) * model.w[ja] + rp * z[a]);
    }
    Ok(grad)
}

/// Componentwise clamp of `x` into the feasible box.
pub fn project_box(x: &[f64], config: &AttackConfig) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(j, &v)| v.clamp(config.box_low[j], config.box_high[j]))
        .collect()
}

/// Select the attacker's starting points: train a clean model on `train`,
/// then for each target label take the opposite-label rows whose squared
/// residual under the flipped label, `(w·x + b - y_p)^2`, is largest (ties
/// prefer the lowest index). Returns copies of those features carrying the
/// target labels.
pub fn choose_initial_points(
    train: &LabeledDataset,
    q: usize,
    lambda: f64,
    mode: TargetMode,
) -> Result<PoisonSet> {
    let d = train.dim();
    if q == 0 {
        return Ok(PoisonSet::empty(d));
    }
    let targets: Vec<f64> = (0..q)
        .map(|j| match mode {
            TargetMode::Alternate => {
                if j % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            TargetMode::AllPositive => 1.0,
            TargetMode::AllNegative => -1.0,
        })
        .collect();
    let model = train_lasso(train, &TrainConfig::with_lambda(lambda))?;

    let mut rows = vec![Vec::new(); q];
    for target in [1.0, -1.0] {
        let slots: Vec<usize> = (0..q).filter(|&j| targets[j] == target).collect();
        if slots.is_empty() {
            continue;
        }
        let candidates = train.indices_with_label(-target);
        if candidates.len() < slots.len() {
            return Err(Error::InsufficientData(format!(
                "initial-point selection needs {} rows with label {:+} to flip, found {}",
                slots.len(),
                -target,
                candidates.len()
            )));
        }
        let mut ranked: Vec<(f64, usize)> = candidates
            .iter()
            .map(|&i| {
                let r = dot(&model.w, train.row(i)) + model.b - target;
                (r * r, i)
            })
            .collect();
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for (slot, &(_, src)) in slots.iter().zip(ranked.iter()) {
            rows[*slot] = train.row(src).to_vec();
        }
    }
    PoisonSet::new(rows, targets)
}

/// Golden-section search for the maximizer of `phi` over `[0, 1]`.
///
/// `phi0` is the (already known) value at 0; `phi` is evaluated lazily and
/// may fail, aborting the search. Returns the best *evaluated* step and its
/// value, so the guarantee `value >= phi0` is exact: if no evaluation beats
/// `phi0`, the result is `(0.0, phi0)` bit-for-bit. When the bracket ends
/// against the right edge the endpoint `phi(1)` is evaluated too, letting a
/// monotone objective return the full step instead of `1 - O(tol)`.
pub fn golden_section_max(
    phi0: f64,
    tol: f64,
    mut phi: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    const INVPHI2: f64 = 1.0 - INVPHI;
    let mut best = (0.0, phi0);
    let mut a = 0.0_f64;
    let mut b = 1.0_f64;
    let mut c = a + INVPHI2 * (b - a);
    let mut dpt = a + INVPHI * (b - a);
    let mut fc = phi(c)?;
    if fc > best.1 {
        best = (c, fc);
    }
    let mut fd = phi(dpt)?;
    if fd > best.1 {
        best = (dpt, fd);
    }
    while b - a > tol {
        if fc > fd {
            b = dpt;
            dpt = c;
            fd = fc;
            c = a + INVPHI2 * (b - a);
            fc = phi(c)?;
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = dpt;
            fc = fd;
            dpt = a + INVPHI * (b - a);
            fd = phi(dpt)?;
            if fd > best.1 {
                best = (dpt, fd);
            }
        }
    }
    if b >= 1.0 - 10.0 * tol {
        let f1 = phi(1.0)?;
        if f1 > best.1 {
            best = (1.0, f1);
        }
    }
    if best.1 > phi0 {
        Ok(best)
    } else {
        Ok((0.0, phi0))
    }
}

/// Line search along the feasible direction `g` for poison point `j`:
/// maximizes the validation half-MSE of the model retrained (warm-started
/// from `model`) with point `j` moved to `x_p + eta * g`. Returns the step
/// and the objective it achieves (`eta = 0` with the incoming objective
/// when nothing improves).
#[allow(clippy::too_many_arguments)]
pub fn golden_section_step(
    data: &mut LabeledDataset,
    row_index: usize,
    origin: &[f64],
    direction: &[f64],
    model: &LinearClassifier,
    val: &LabeledDataset,
    train_cfg: &TrainConfig,
    config: &AttackConfig,
    current_objective: f64,
) -> Result<(f64, f64)> {
    let candidate = |eta: f64| -> Vec<f64> {
        let moved: Vec<f64> = origin
            .iter()
            .zip(direction)
            .map(|(&x, &g)| x + eta * g)
            .collect();
        // The segment is feasible by convexity; the projection only strips
        // the last-ulp rounding of the interpolation.
        project_box(&moved, config)
    };
    let result = golden_section_max(current_objective, config.gs_tol, |eta| {
        data.set_row(row_index, &candidate(eta))?;
        let trial = train_lasso_warm(data, train_cfg, model)?;
        half_mse(&trial, val)
    });
    // Leave the row as the caller had it; the caller applies the accepted
    // step itself.
    data.set_row(row_index, origin)?;
    result
}

/// Run the full poisoning attack.
///
/// Initial points are chosen from `train` (and projected into the box);
/// each outer sweep updates every poison point in turn: retrain, implicit
/// gradient, feasible direction `g = project(x + grad) - x`, golden-section
/// step. The sweep objective is exactly non-decreasing. Stops when the
/// objective changes by less than `epsilon` over a sweep, or after
/// `max_outer_iters` sweeps (`converged` reports which).
pub fn run_optimal_attack(
    train: &LabeledDataset,
    val: &LabeledDataset,
    config: &AttackConfig,
    lambda: f64,
) -> Result<AttackOutcome> {
    config.validate(train.dim())?;
    if val.is_empty() {
        return Err(Error::EmptyDataset("validation set for the attack".into()));
    }
    let train_cfg = TrainConfig::with_lambda(lambda);

    let mut poison = choose_initial_points(train, config.q, lambda, config.target_mode)?;
    for j in 0..poison.len() {
        let projected = project_box(poison.point(j), config);
        poison.set_point(j, &projected)?;
    }

    if poison.is_empty() {
        let model = train_lasso(train, &train_cfg)?;
        let objective = half_mse(&model, val)?;
        return Ok(AttackOutcome {
            poison,
            model,
            trace: Vec::new(),
            point_trace: Vec::new(),
            initial_objective: objective,
            objective,
            converged: true,
        });
    }

    let mut data = train.concat(&poison.to_dataset())?;
    let base = train.len();
    let mut model = train_lasso(&data, &train_cfg)?;
    let mut objective = half_mse(&model, val)?;
    let initial_objective = objective;
    let mut trace = Vec::new();
    let mut point_trace: Vec<Vec<f64>> = Vec::new();
    let mut converged = false;

    // Step proposals use the unnormalized (per-sample-sum) validation
    // objective: the same maximizer and the same direction as the averaged
    // form the gradient routine reports, but the proposed target actually
    // reaches the box boundary instead of creeping by O(1/n_val) — the
    // line search then decides how far along that segment to go.
    let proposal_scale = val.len() as f64;

    for outer in 1..=config.max_outer_iters {
        let sweep_start = objective;
        for j in 0..poison.len() {
            let grad = poison_gradient(j, &poison, &model, &data, val)?;
            let origin = poison.point(j).to_vec();
            let target: Vec<f64> = origin
                .iter()
                .zip(&grad)
                .map(|(&x, &g)| x + proposal_scale * g)
                .collect();
            let projected = project_box(&target, config);
            let direction: Vec<f64> = projected
                .iter()
                .zip(&origin)
                .map(|(&p, &x)| p - x)
                .collect();
            if direction.iter().all(|&g| g == 0.0) {
                trace.push(TraceRow {
                    outer_iter: outer,
                    point_index: j,
                    eta: 0.0,
                    objective,
                });
                point_trace.push(origin);
                continue;
            }
            let (eta, new_objective) = golden_section_step(
                &mut data,
                base + j,
                &origin,
                &direction,
                &model,
                val,
                &train_cfg,
                config,
                objective,
            )?;
            if eta > 0.0 {
                let moved: Vec<f64> = origin
                    .iter()
                    .zip(&direction)
                    .map(|(&x, &g)| x + eta * g)
                    .collect();
                let accepted = project_box(&moved, config);
                poison.set_point(j, &accepted)?;
                data.set_row(base + j, &accepted)?;
                model = train_lasso_warm(&data, &train_cfg, &model)?;
                objective = new_objective;
            }
            trace.push(TraceRow {
                outer_iter: outer,
                point_index: j,
                eta,
                objective,
            });
            point_trace.push(poison.point(j).to_vec());
        }
        if (objective - sweep_start).abs() < config.epsilon {
            converged = true;
            break;
        }
    }

    if config.round_binary {
        for j in 0..poison.len() {
            let rounded: Vec<f64> = poison.point(j).iter().map(|&v| v.round()).collect();
            let rounded = project_box(&rounded, config);
            poison.set_point(j, &rounded)?;
            data.set_row(base + j, &rounded)?;
        }
        model = train_lasso_warm(&data, &train_cfg, &model)?;
        objective = half_mse(&model, val)?;
    }

    Ok(AttackOutcome {
        poison,
        model,
        trace,
        point_trace,
        initial_objective,
        objective,
        converged,
    })
}
