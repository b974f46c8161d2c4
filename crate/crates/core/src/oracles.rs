//! Independent reference implementations used for self-checks.
//!
//! Every routine here re-derives a quantity the production modules compute,
//! by a deliberately different route: dense linear algebra instead of
//! iterative solvers, brute-force scans instead of incremental bookkeeping,
//! finite differences instead of implicit gradients. The test suite and the
//! `poisonlab gradcheck` / `poisonlab oracle-check` subcommands compare the
//! two routes; nothing in the production paths may call into this module,
//! or the comparison stops meaning anything.

use nalgebra::{DMatrix, DVector};

use crate::dataset::{Features, LabeledDataset};
use crate::error::{Error, Result};
use crate::linear_model::{predict, LinearClassifier};

/// Unregularized least-squares fit by dense normal equations on the
/// bias-augmented design matrix.
///
/// Returns `(w, b)` minimizing `1/(2n) * sum (w . x_i + b - y_i)^2`. Errors
/// if the normal matrix is singular (collinear design).
pub fn least_squares_normal_eq(data: &LabeledDataset) -> Result<(Vec<f64>, f64)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("least squares needs rows".into()));
    }
    let n = data.len();
    let d = data.dim();
    // A = [X 1], solve (A^T A) beta = A^T y.
    let a = DMatrix::from_fn(n, d + 1, |i, j| if j < d { data.row(i)[j] } else { 1.0 });
    let y = DVector::from_fn(n, |i, _| data.label(i));
    let ata = a.transpose() * &a;
    let aty = a.transpose() * y;
    let beta = ata
        .lu()
        .solve(&aty)
        .ok_or(Error::DegenerateHessian { cond: f64::INFINITY })?;
    let w = beta.as_slice()[..d].to_vec();
    Ok((w, beta[d]))
}

/// Exact k-th-nearest-neighbour distance by full scan and sort.
///
/// `exclude_one_equal` removes a single occurrence of a row bitwise-equal to
/// `x` (the first such row) before ranking, mirroring how scorers treat
/// queries that are themselves members of the reference set.
pub fn knn_distance_brute(train: &Features, x: &[f64], k: usize, exclude_one_equal: bool) -> f64 {
    let mut dists: Vec<f64> = Vec::with_capacity(train.len());
    let mut skipped = false;
    for i in 0..train.len() {
        let row = train.row(i);
        if exclude_one_equal && !skipped && row == x {
            skipped = true;
            continue;
        }
        dists.push(euclidean(row, x));
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    dists[k - 1]
}

/// Minimum distance from `x` to any row of `sample`.
pub fn min_distance_brute(sample: &Features, x: &[f64]) -> f64 {
    (0..sample.len())
        .map(|i| euclidean(sample.row(i), x))
        .fold(f64::INFINITY, f64::min)
}

/// Euclidean distance, shared by the brute-force detectors.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Textbook local-outlier-factor computation by direct evaluation of the
/// definitions, with no shared code or cached quantities.
///
/// Returns the LOF of `x` relative to `train`. `member_index` marks `x` as
/// the given training row (self excluded by index); pass `None` for an
/// outside query, which is compared against all rows (one bitwise-equal
/// occurrence excluded, as in the production scorer).
pub fn lof_brute(train: &Features, x: &[f64], k: usize, member_index: Option<usize>) -> f64 {
    const LRD_CAP: f64 = 1e12;
    let n = train.len();

    // k-distance and neighbourhood of every training row (self excluded).
    let kdist = |i: usize| -> f64 {
        let mut d: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| euclidean(train.row(i), train.row(j)))
            .collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        d[k - 1]
    };
    let neighbours = |i: usize| -> Vec<usize> {
        let kd = kdist(i);
        (0..n)
            .filter(|&j| j != i && euclidean(train.row(i), train.row(j)) <= kd)
            .collect()
    };
    let lrd = |i: usize| -> f64 {
        let ns = neighbours(i);
        let sum: f64 = ns
            .iter()
            .map(|&o| euclidean(train.row(i), train.row(o)).max(kdist(o)))
            .sum();
        let mean = sum / ns.len() as f64;
        if mean <= 1.0 / LRD_CAP {
            LRD_CAP
        } else {
            (1.0 / mean).min(LRD_CAP)
        }
    };

    match member_index {
        Some(i) => {
            let ns = neighbours(i);
            let mean_lrd: f64 = ns.iter().map(|&o| lrd(o)).sum::<f64>() / ns.len() as f64;
            mean_lrd / lrd(i)
        }
        None => {
            // Distances from the query, excluding one bitwise-equal row if
            // present (first occurrence).
            let excluded = (0..n).find(|&j| train.row(j) == x);
            let rows: Vec<usize> = (0..n).filter(|&j| Some(j) != excluded).collect();
            let mut ds: Vec<f64> = rows.iter().map(|&j| euclidean(train.row(j), x)).collect();
            let mut sorted = ds.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let kd = sorted[k - 1];
            let ns: Vec<usize> = rows
                .iter()
                .zip(ds.iter_mut())
                .filter(|(_, d)| **d <= kd)
                .map(|(&j, _)| j)
                .collect();
            let reach_sum: f64 = ns
                .iter()
                .map(|&o| euclidean(train.row(o), x).max(kdist(o)))
                .sum();
            let mean_reach = reach_sum / ns.len() as f64;
            let lrd_x = if mean_reach <= 1.0 / LRD_CAP {
                LRD_CAP
            } else {
                (1.0 / mean_reach).min(LRD_CAP)
            };
            let mean_lrd: f64 = ns.iter().map(|&o| lrd(o)).sum::<f64>() / ns.len() as f64;
            mean_lrd / lrd_x
        }
    }
}

/// Solve the one-class-SVM dual by projected gradient on the capped simplex
/// `{alpha : 0 <= alpha_i <= 1/(nu n), sum alpha = 1}`, minimizing
/// `1/2 * alpha^T K alpha` with the linear kernel.
///
/// A completely different algorithm from the production pairwise solver;
/// returns the optimal dual objective value.
pub fn ocsvm_dual_objective_pg(points: &Features, nu: f64) -> Result<f64> {
    let n = points.len();
    if n == 0 {
        return Err(Error::EmptyDataset("one-class SVM needs rows".into()));
    }
    let cap = 1.0 / (nu * n as f64);
    if cap < 1.0 / n as f64 - 1e-12 {
        return Err(Error::InvalidConfig(format!("nu = {nu} leaves the simplex empty")));
    }
    let k = DMatrix::from_fn(n, n, |i, j| {
        points
            .row(i)
            .iter()
            .zip(points.row(j))
            .map(|(a, b)| a * b)
            .sum::<f64>()
    });

    // Lipschitz constant of the gradient K alpha.
    let lip = k.norm().max(1e-12); // Frobenius bound on the spectral norm
    let step = 1.0 / lip;
    let mut alpha = DVector::from_element(n, 1.0 / n as f64);
    let mut obj_prev = f64::INFINITY;
    for _ in 0..200_000 {
        let grad = &k * &alpha;
        let obj = 0.5 * alpha.dot(&grad);
        let cand = &alpha - step * grad;
        alpha = project_capped_simplex(cand.as_slice(), cap);
        if (obj_prev - obj).abs() <= 1e-14 * obj.abs().max(1.0) {
            break;
        }
        obj_prev = obj;
    }
    let grad = &k * &alpha;
    Ok(0.5 * alpha.dot(&grad))
}

/// Euclidean projection onto `{a : 0 <= a_i <= cap, sum a = 1}` by
/// bisection on the shift multiplier.
fn project_capped_simplex(v: &[f64], cap: f64) -> DVector<f64> {
    let n = v.len();
    let clip = |t: f64| -> f64 {
        v.iter()
            .map(|&vi| (vi - t).clamp(0.0, cap))
            .sum::<f64>()
    };
    // sum(t) is non-increasing in t; bracket the root of sum(t) = 1.
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - cap - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clip(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    DVector::from_iterator(n, v.iter().map(|&vi| (vi - t).clamp(0.0, cap)))
}

/// Attack-objective gradient at one poison point by central finite
/// differences with full retraining — the ground truth the implicit
/// gradient is checked against.
///
/// For each coordinate of the poison point, retrains on `train + poison`
/// with that coordinate displaced by ±`h` and differences the validation
/// half-MSE. `retrain` abstracts the trainer so the caller controls
/// tolerances.
pub fn fd_attack_gradient(
    train: &LabeledDataset,
    val: &LabeledDataset,
    poison_rows: &[Vec<f64>],
    poison_labels: &[f64],
    point: usize,
    h: f64,
    retrain: &mut dyn FnMut(&LabeledDataset) -> Result<LinearClassifier>,
) -> Result<Vec<f64>> {
    let d = train.dim();
    let mut grad = vec![0.0; d];
    for c in 0..d {
        let mut objs = [0.0f64; 2];
        for (side, sign) in [(0usize, 1.0f64), (1usize, -1.0f64)] {
            let mut full = train.clone();
            for (i, row) in poison_rows.iter().enumerate() {
                let mut r = row.clone();
                if i == point {
                    r[c] += sign * h;
                }
                full.push_row(&r, poison_labels[i])?;
            }
            let model = retrain(&full)?;
            let mut sum = 0.0;
            for (x, y) in val.iter() {
                let r = predict(&model, x) - y;
                sum += r * r;
            }
            objs[side] = sum / (2.0 * val.len() as f64);
        }
        grad[c] = (objs[0] - objs[1]) / (2.0 * h);
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_satisfies_normal_equations() {
        // The least-squares optimum is characterized by the residual being
        // orthogonal to every column of the bias-augmented design [X 1];
        // check A^T r = 0 on an overdetermined system.
        let rows = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        ];
        let labels = vec![1.0, 1.0, -1.0, 1.0];
        let data = LabeledDataset::new(rows, labels).unwrap();
        let (w, b) = least_squares_normal_eq(&data).unwrap();
        let mut at_r = vec![0.0; 3];
        for (x, y) in data.iter() {
            let r = w[0] * x[0] + w[1] * x[1] + b - y;
            at_r[0] += r * x[0];
            at_r[1] += r * x[1];
            at_r[2] += r;
        }
        for v in at_r {
            assert!(v.abs() < 1e-12, "A^T r component {v}");
        }
    }

    #[test]
    fn least_squares_rejects_collinear_design() {
        // Second column is a copy of the first: normal matrix singular.
        let rows = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        let data = LabeledDataset::new(rows, vec![1.0, -1.0, 1.0]).unwrap();
        assert!(least_squares_normal_eq(&data).is_err());
    }

    #[test]
    fn capped_simplex_projection_is_feasible_and_idempotent() {
        let cap = 0.4;
        let v = [0.9, -0.3, 0.5, 0.1];
        let p = project_capped_simplex(&v, cap);
        assert!((p.sum() - 1.0).abs() < 1e-10);
        assert!(p.iter().all(|&a| (-1e-12..=cap + 1e-12).contains(&a)));
        let q = project_capped_simplex(p.as_slice(), cap);
        for i in 0..4 {
            assert!((p[i] - q[i]).abs() < 1e-9);
        }
    }
}
