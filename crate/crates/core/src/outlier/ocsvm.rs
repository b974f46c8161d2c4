//! Linear one-class SVM, fitted in the dual by a pairwise (SMO-style)
//! coordinate solver.
//!
//! The dual problem is
//!
//! ```text
//!   min_alpha  1/2 * alpha^T K alpha
//!   s.t.       0 <= alpha_i <= 1/(nu n),   sum_i alpha_i = 1
//! ```
//!
//! with the linear kernel `K_ij = x_i . x_j`. The solver repeatedly picks
//! the most violating pair of coordinates and moves mass between them
//! (which preserves the sum constraint exactly), stopping when the maximal
//! KKT violation drops to `1e-6`. The primal weights are `w = sum alpha_i
//! x_i`, the offset `rho` comes from the free support vectors, and the
//! outlier score of a query is `rho - w . x` — positive outside the fitted
//! half-space, negative inside.
//!
//! `nu` is selected by maximizing the number of held-out inliers under
//! leave-one-out refitting, ties going to the smallest candidate.

use crate::dataset::Features;
use crate::error::{Error, Result};
use crate::linear_model::dot;

/// KKT tolerance at which the pairwise solver declares optimality.
const KKT_TOL: f64 = 1e-6;
/// Pair-update cap; hitting it is a [`Error::NonConvergence`].
const MAX_STEPS: usize = 200_000;

/// A fitted linear one-class SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct OcSvmModel {
    /// Primal weights `sum_i alpha_i x_i`.
    pub w: Vec<f64>,
    /// Margin offset.
    pub rho: f64,
    /// The `nu` the model was fitted with.
    pub nu: f64,
    /// Optimal dual objective `1/2 * alpha^T K alpha` (kept for audits).
    pub dual_objective: f64,
}

impl OcSvmModel {
    /// Outlier score `rho - w . x`; higher is more anomalous.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.rho - dot(&self.w, x)
    }
}

/// Dense row-major Gram matrix of the linear kernel.
fn gram(points: &Features) -> Vec<f64> {
    let n = points.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = dot(points.row(i), points.row(j));
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

struct DualSolution {
    alpha: Vec<f64>,
    rho: f64,
    dual_objective: f64,
}

/// Solve the dual restricted to `subset` of the rows behind `gram`
/// (`stride` = full row length of the Gram buffer).
fn smo_on_subset(gram: &[f64], stride: usize, subset: &[usize], nu: f64) -> Result<DualSolution> {
    let m = subset.len();
    if m == 0 {
        return Err(Error::EmptyDataset("one-class SVM needs at least one row".into()));
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::InvalidConfig(format!("nu must lie in (0, 1], got {nu}")));
    }
    let c = 1.0 / (nu * m as f64);
    let kk = |a: usize, b: usize| gram[subset[a] * stride + subset[b]];

    // Start from the uniform feasible point and keep g = K alpha current.
    let mut alpha = vec![1.0 / m as f64; m];
    let mut g = vec![0.0; m];
    for (i, gi) in g.iter_mut().enumerate() {
        *gi = (0..m).map(|j| kk(i, j) * alpha[j]).sum();
    }

    let mut steps = 0;
    loop {
        // Most violating pair: the smallest gradient among coordinates with
        // head-room up, the largest among those with head-room down.
        let mut iu = usize::MAX;
        let mut il = usize::MAX;
        for i in 0..m {
            if alpha[i] < c && (iu == usize::MAX || g[i] < g[iu]) {
                iu = i;
            }
            if alpha[i] > 0.0 && (il == usize::MAX || g[i] > g[il]) {
                il = i;
            }
        }
        if iu == usize::MAX || il == usize::MAX {
            break; // the feasible set is a single point (nu = 1)
        }
        if g[il] - g[iu] <= KKT_TOL {
            break;
        }
        if steps >= MAX_STEPS {
            return Err(Error::NonConvergence {
                what: "one-class SVM solver",
                iters: steps,
                residual: g[il] - g[iu],
            });
        }
        steps += 1;

        // Shift t of mass from il to iu; the quadratic along this direction
        // has curvature K_uu + K_ll - 2 K_ul >= 0.
        let room_up = c - alpha[iu];
        let room_down = alpha[il];
        let t_max = room_up.min(room_down);
        let denom = kk(iu, iu) + kk(il, il) - 2.0 * kk(iu, il);
        let t_star = if denom > f64::MIN_POSITIVE {
            (g[il] - g[iu]) / denom
        } else {
            f64::INFINITY
        };
        if t_star >= t_max {
            // Land exactly on the box bound so the free-set test below can
            // use exact comparisons.
            if room_up <= room_down {
                alpha[iu] = c;
                alpha[il] -= t_max;
            } else {
                alpha[iu] += t_max;
                alpha[il] = 0.0;
            }
            for j in 0..m {
                g[j] += t_max * (kk(j, iu) - kk(j, il));
            }
        } else {
            alpha[iu] += t_star;
            alpha[il] -= t_star;
            for j in 0..m {
                g[j] += t_star * (kk(j, iu) - kk(j, il));
            }
        }
    }

    // Offset: free support vectors pin rho = g_i; otherwise take the middle
    // of the KKT bracket [max g over alpha = C, min g over alpha = 0].
    let free: Vec<usize> = (0..m).filter(|&i| alpha[i] > 0.0 && alpha[i] < c).collect();
    let rho = if !free.is_empty() {
        free.iter().map(|&i| g[i]).sum::<f64>() / free.len() as f64
    } else {
        let at_cap = (0..m)
            .filter(|&i| alpha[i] >= c)
            .map(|i| g[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let at_zero = (0..m)
            .filter(|&i| alpha[i] <= 0.0)
            .map(|i| g[i])
            .fold(f64::INFINITY, f64::min);
        match (at_cap.is_finite(), at_zero.is_finite()) {
            (true, true) => 0.5 * (at_cap + at_zero),
            (true, false) => at_cap,
            _ => at_zero,
        }
    };

    let dual_objective = 0.5 * alpha.iter().zip(&g).map(|(a, gi)| a * gi).sum::<f64>();
    Ok(DualSolution {
        alpha,
        rho,
        dual_objective,
    })
}

/// Fit with a fixed `nu`.
pub fn fit_ocsvm_with_nu(points: &Features, nu: f64) -> Result<OcSvmModel> {
    let n = points.len();
    if n == 0 {
        return Err(Error::EmptyDataset("one-class SVM needs at least one row".into()));
    }
    let k = gram(points);
    let subset: Vec<usize> = (0..n).collect();
    let sol = smo_on_subset(&k, n, &subset, nu)?;
    let mut w = vec![0.0; points.dim()];
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a != 0.0 {
            for (wj, &xj) in w.iter_mut().zip(points.row(i)) {
                *wj += a * xj;
            }
        }
    }
    Ok(OcSvmModel {
        w,
        rho: sol.rho,
        nu,
        dual_objective: sol.dual_objective,
    })
}

/// Fit with `nu` chosen from `grid` by leave-one-out validation: each
/// candidate is scored by how many held-out points the refitted model
/// accepts as inliers (score `<= 0`), ties resolved toward the smallest
/// `nu`. The returned model is fitted on all rows with the winner.
pub fn fit_ocsvm_loo(points: &Features, grid: &[f64]) -> Result<OcSvmModel> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientData(
            "leave-one-out nu selection needs at least two rows".into(),
        ));
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty nu grid".into()));
    }
    let mut candidates = grid.to_vec();
    for &nu in &candidates {
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::InvalidConfig(format!("nu must lie in (0, 1], got {nu}")));
        }
    }
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    candidates.dedup();

    let k = gram(points);
    let mut best: Option<(usize, f64)> = None; // (inliers, nu)
    for &nu in &candidates {
        let mut inliers = 0usize;
        for held in 0..n {
            let subset: Vec<usize> = (0..n).filter(|&i| i != held).collect();
            let sol = smo_on_subset(&k, n, &subset, nu)?;
            // rho - w . x_held, with w . x_held expanded through the Gram
            // row so no feature-space work is needed.
            let wx: f64 = subset
                .iter()
                .zip(&sol.alpha)
                .map(|(&j, &a)| a * k[j * n + held])
                .sum();
            if sol.rho - wx <= 0.0 {
                inliers += 1;
            }
        }
        // Strict improvement required: on ties the earlier (smaller) nu wins.
        if best.is_none_or(|(bi, _)| inliers > bi) {
            best = Some((inliers, nu));
        }
    }
    fit_ocsvm_with_nu(points, best.expect("grid is nonempty").1)
}
