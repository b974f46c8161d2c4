//! Label-flipping baseline attacks.
//!
//! These attacks never touch features — the adversary only negates labels of
//! existing training rows, which makes the corrupted points blend in with
//! genuine data far better than inserted points do:
//!
//! * **Random flipping** ([`rlf`]) negates the labels of uniformly chosen
//!   rows.
//! * **Informed flipping** ([`ilf`]) trains a clean model first and negates
//!   the labels whose *flipped* version the model gets most wrong — the
//!   rows with the largest `(w·x + b + y)^2`, i.e. confidently correct
//!   points far from the boundary.

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::linear_model::{dot, train_lasso, TrainConfig};
use crate::rng;

/// Settings of a flipping attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipSpec {
    /// Fraction of training rows to flip; the count is
    /// `round(fraction * n)`.
    pub fraction: f64,
    /// Seed of the uniform selection (random flipping only).
    #[serde(default)]
    pub seed: u64,
}

/// A flipped copy of the training set plus the indices that were flipped.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipOutcome {
    /// The training set with the chosen labels negated; features and row
    /// order are untouched.
    pub data: LabeledDataset,
    /// Flipped row indices, ascending.
    pub flipped: Vec<usize>,
}

fn flip_count(fraction: f64, n: usize) -> Result<usize> {
    if !(fraction.is_finite() && (0.0..=1.0).contains(&fraction)) {
        return Err(Error::InvalidConfig(format!(
            "flip fraction must lie in [0, 1], got {fraction}"
        )));
    }
    Ok(((fraction * n as f64).round() as usize).min(n))
}

fn apply_flips(train: &LabeledDataset, mut flipped: Vec<usize>) -> FlipOutcome {
    flipped.sort_unstable();
    let mut data = train.clone();
    for &i in &flipped {
        data.set_label(i, -data.label(i))
            .expect("negating a valid label at a valid index");
    }
    FlipOutcome { data, flipped }
}

/// Random label flipping: negate `round(fraction * n)` uniformly chosen
/// distinct labels. Deterministic given the seed.
pub fn rlf(train: &LabeledDataset, spec: &FlipSpec) -> Result<FlipOutcome> {
    let k = flip_count(spec.fraction, train.len())?;
    let mut prng = rng::rng_from_seed(spec.seed);
    let chosen = rng::sample_without_replacement(&mut prng, train.len(), k);
    Ok(apply_flips(train, chosen))
}

/// Informed label flipping: train a clean lasso at `lambda`, then negate
/// the `round(fraction * n)` labels with the largest flipped-label squared
/// residual `(w·x + b + y)^2`. Ties prefer the lowest index. Deterministic.
pub fn ilf(train: &LabeledDataset, lambda: f64, fraction: f64) -> Result<FlipOutcome> {
    let k = flip_count(fraction, train.len())?;
    if k == 0 {
        return Ok(apply_flips(train, Vec::new()));
    }
    let model = train_lasso(train, &TrainConfig::with_lambda(lambda))?;
    let key: Vec<f64> = train
        .iter()
        .map(|(x, y)| {
            let r = dot(&model.w, x) + model.b + y;
            r * r
        })
        .collect();
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.sort_by(|&i, &j| key[j].partial_cmp(&key[i]).unwrap().then(i.cmp(&j)));
    order.truncate(k);
    Ok(apply_flips(train, order))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_gaussian_binary, GaussianSpec};

    fn blob(seed: u64, n_per_class: usize) -> LabeledDataset {
        gen_gaussian_binary(&GaussianSpec {
            mean_pos: vec![1.5, 0.0],
            mean_neg: vec![-1.5, 0.0],
            cov_scale: 0.6,
            n_per_class,
            seed,
        })
        .unwrap()
    }

    fn count_label_diffs(a: &LabeledDataset, b: &LabeledDataset) -> usize {
        (0..a.len()).filter(|&i| a.label(i) != b.label(i)).count()
    }

    #[test]
    fn rlf_flips_exactly_the_rounded_count() {
        let train = blob(7, 100);
        for (fraction, expect) in [(0.0, 0), (0.1, 20), (0.25, 50), (1.0, 200)] {
            let out = rlf(&train, &FlipSpec { fraction, seed: 3 }).unwrap();
            assert_eq!(out.flipped.len(), expect);
            assert_eq!(count_label_diffs(&train, &out.data), expect);
            assert_eq!(out.data.features_flat(), train.features_flat());
        }
        // round() is half-away-from-zero: 10 rows at 0.25 → 3 flips.
        let small = blob(8, 5);
        let out = rlf(&small, &FlipSpec { fraction: 0.25, seed: 0 }).unwrap();
        assert_eq!(out.flipped.len(), 3);
    }

    #[test]
    fn rlf_edge_fractions() {
        let train = blob(9, 10);
        let none = rlf(&train, &FlipSpec { fraction: 0.0, seed: 1 }).unwrap();
        assert_eq!(none.data, train);
        assert!(none.flipped.is_empty());
        let all = rlf(&train, &FlipSpec { fraction: 1.0, seed: 1 }).unwrap();
        assert_eq!(all.flipped, (0..20).collect::<Vec<_>>());
        for i in 0..train.len() {
            assert_eq!(all.data.label(i), -train.label(i));
        }
    }

    #[test]
    fn rlf_is_seeded() {
        let train = blob(10, 50);
        let spec = FlipSpec { fraction: 0.2, seed: 11 };
        assert_eq!(rlf(&train, &spec).unwrap(), rlf(&train, &spec).unwrap());
        let other = rlf(&train, &FlipSpec { fraction: 0.2, seed: 12 }).unwrap();
        assert_ne!(rlf(&train, &spec).unwrap().flipped, other.flipped);
    }

    #[test]
    fn fraction_outside_unit_interval_is_rejected() {
        let train = blob(11, 5);
        assert!(rlf(&train, &FlipSpec { fraction: -0.1, seed: 0 }).is_err());
        assert!(rlf(&train, &FlipSpec { fraction: 1.5, seed: 0 }).is_err());
        assert!(ilf(&train, 0.01, f64::NAN).is_err());
    }

    #[test]
    fn ilf_flips_the_largest_flipped_residuals() {
        // 1-D separable set; the clean model is near-perfect, so the
        // flipped residual (w·x + b + y)^2 grows with the margin and the
        // extreme points of both classes must be flipped first.
        let rows: Vec<Vec<f64>> = (1..=5)
            .flat_map(|v| [vec![v as f64], vec![-(v as f64)]])
            .collect();
        let labels: Vec<f64> = (1..=5).flat_map(|_| [1.0, -1.0]).collect();
        let train = LabeledDataset::new(rows, labels).unwrap();
        let out = ilf(&train, 1e-3, 0.2).unwrap();
        assert_eq!(out.flipped.len(), 2);
        assert!(out.flipped.contains(&8), "x=+5 not flipped: {:?}", out.flipped);
        assert!(out.flipped.contains(&9), "x=-5 not flipped: {:?}", out.flipped);

        // Independent re-derivation: enumerate the keys and check the
        // chosen set is exactly the top-k.
        let model = train_lasso(&train, &TrainConfig::with_lambda(1e-3)).unwrap();
        let mut keyed: Vec<(f64, usize)> = train
            .iter()
            .enumerate()
            .map(|(i, (x, y))| {
                let r = dot(&model.w, x) + model.b + y;
                (r * r, i)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut expect: Vec<usize> = keyed[..2].iter().map(|&(_, i)| i).collect();
        expect.sort_unstable();
        assert_eq!(out.flipped, expect);
    }

    #[test]
    fn ilf_breaks_ties_by_lowest_index() {
        // Rows 0..3 are bitwise identical, so their keys tie exactly; the
        // flip set must be the lowest indices.
        let rows = vec![vec![2.0], vec![2.0], vec![2.0], vec![2.0], vec![-2.0], vec![-2.0]];
        let labels = vec![1.0, 1.0, 1.0, 1.0, -1.0, -1.0];
        let train = LabeledDataset::new(rows, labels).unwrap();
        let model = train_lasso(&train, &TrainConfig::with_lambda(1e-3)).unwrap();
        let key_pos = {
            let r = dot(&model.w, &[2.0]) + model.b + 1.0;
            r * r
        };
        let key_neg = {
            let r = dot(&model.w, &[-2.0]) + model.b - 1.0;
            r * r
        };
        // The construction is symmetric; make sure the tie we exercise is
        // between the identical positive rows.
        assert!(key_pos >= key_neg - 1e-9);
        let out = ilf(&train, 1e-3, 1.0 / 3.0).unwrap();
        assert_eq!(out.flipped.len(), 2);
        if key_pos > key_neg {
            assert_eq!(out.flipped, vec![0, 1]);
        } else {
            // Exact tie across classes still resolves to the lowest
            // indices overall.
            assert_eq!(out.flipped, vec![0, 1]);
        }
    }

    #[test]
    fn ilf_is_deterministic_and_preserves_features() {
        let train = blob(13, 40);
        let a = ilf(&train, 0.01, 0.15).unwrap();
        let b = ilf(&train, 0.01, 0.15).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.data.features_flat(), train.features_flat());
        assert_eq!(a.flipped.len(), 12);
        assert_eq!(count_label_diffs(&train, &a.data), 12);
        let none = ilf(&train, 0.01, 0.0).unwrap();
        assert_eq!(none.data, train);
    }
}
