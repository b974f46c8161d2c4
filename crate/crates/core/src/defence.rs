//! Defences against training-set poisoning.
//!
//! Two families:
//!
//! * **Outlier filtering** — fit one outlier scorer per class on a trusted
//!   (attack-free) sample, set per-class thresholds at the empirical
//!   `alpha`-quantile of the trusted points' own scores, then drop every
//!   training point scoring above its class threshold. With `alpha = 0.95`
//!   roughly 5% of genuine data is sacrificed in exchange for removing
//!   whatever the attacker appended.
//! * **Noise-corrected loss** — skip filtering and instead train on a
//!   reweighted squared loss that is unbiased under class-conditional label
//!   flipping with known (or cross-validated) flip rates.
//!
//! Threshold quantiles use the nearest-rank convention: the threshold is an
//! actual trusted score, the smallest one with empirical CDF `>= alpha`.

use serde::{Deserialize, Serialize};

use crate::dataset::{Features, LabeledDataset};
use crate::error::{Error, Result};
use crate::linear_model::{dot, LinearClassifier};
use crate::outlier::{fit_scorer, OutlierScorer, ScorerConfig, ScorerKind};

/// Nearest-rank empirical quantile: the smallest score whose empirical CDF
/// reaches `alpha`, i.e. `sorted[ceil(alpha * n) - 1]`.
pub fn ecdf_threshold(scores: &[f64], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyDataset("quantile of zero scores".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidConfig("scores contain NaN".into()));
    }
    let n = scores.len();
    // Tiny backoff keeps ranks exact when alpha * n is an integer that
    // floating multiplication rounds up (e.g. 0.07 * 100).
    let rank = ((alpha * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let rank = rank.min(n);
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(sorted[rank - 1])
}

/// A fitted filtering defence: one scorer and one threshold per class.
#[derive(Debug, Clone)]
pub struct DefenceModel {
    scorer_pos: OutlierScorer,
    scorer_neg: OutlierScorer,
    t_pos: f64,
    t_neg: f64,
    alpha: f64,
    n_pos: usize,
    n_neg: usize,
}

/// JSON-friendly description of a fitted defence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenceSummary {
    pub detector: String,
    pub alpha: f64,
    pub threshold_pos: f64,
    pub threshold_neg: f64,
    pub n_trusted_pos: usize,
    pub n_trusted_neg: usize,
}

/// Fit per-class scorers on the trusted set and calibrate thresholds so
/// that a fraction `alpha` of each class's own scores pass.
pub fn fit_defence(
    trusted: &LabeledDataset,
    detector: &ScorerConfig,
    alpha: f64,
) -> Result<DefenceModel> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let mut per_class = Vec::with_capacity(2);
    for label in [1.0, -1.0] {
        let idx = trusted.indices_with_label(label);
        if idx.is_empty() {
            return Err(Error::EmptyDataset(format!(
                "trusted set has no rows with label {label:+}"
            )));
        }
        let class = Features::from_labeled(&trusted.subset(&idx));
        let scorer = fit_scorer(detector, &class)?;
        // Self-scores: membership is handled by the scorers' value-based
        // exclusion, so these are comparable with later queries.
        let scores: Vec<f64> = (0..class.len())
            .map(|i| scorer.score(class.row(i)))
            .collect::<Result<_>>()?;
        let threshold = ecdf_threshold(&scores, alpha)?;
        per_class.push((scorer, threshold, idx.len()));
    }
    let (scorer_neg, t_neg, n_neg) = per_class.pop().expect("two classes fitted");
    let (scorer_pos, t_pos, n_pos) = per_class.pop().expect("two classes fitted");
    Ok(DefenceModel {
        scorer_pos,
        scorer_neg,
        t_pos,
        t_neg,
        alpha,
        n_pos,
        n_neg,
    })
}

impl DefenceModel {
    /// Score `x` with the scorer of the given class.
    pub fn score(&self, x: &[f64], label: f64) -> Result<f64> {
        if label == 1.0 {
            self.scorer_pos.score(x)
        } else if label == -1.0 {
            self.scorer_neg.score(x)
        } else {
            Err(Error::InvalidLabel {
                index: 0,
                value: label,
            })
        }
    }

    /// The calibrated threshold of the given class.
    pub fn threshold(&self, label: f64) -> f64 {
        if label > 0.0 {
            self.t_pos
        } else {
            self.t_neg
        }
    }

    /// The quantile level the thresholds were calibrated at.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Remove every row scoring strictly above its class threshold.
    ///
    /// Returns the kept rows (original order preserved) and the removed
    /// row indices (ascending). The kept set may be empty.
    pub fn filter(&self, data: &LabeledDataset) -> Result<(LabeledDataset, Vec<usize>)> {
        let mut kept = Vec::with_capacity(data.len());
        let mut removed = Vec::new();
        for i in 0..data.len() {
            let label = data.label(i);
            let s = self.score(data.row(i), label)?;
            if s > self.threshold(label) {
                removed.push(i);
            } else {
                kept.push(i);
            }
        }
        Ok((data.subset(&kept), removed))
    }

    /// Serializable description (detector kind, alpha, thresholds, trusted
    /// class sizes).
    pub fn summary(&self) -> DefenceSummary {
        DefenceSummary {
            detector: self.scorer_pos.kind().name().to_string(),
            alpha: self.alpha,
            threshold_pos: self.t_pos,
            threshold_neg: self.t_neg,
            n_trusted_pos: self.n_pos,
            n_trusted_neg: self.n_neg,
        }
    }

    /// The scorer kind both classes use.
    pub fn detector_kind(&self) -> ScorerKind {
        self.scorer_pos.kind()
    }
}

/// Class-conditional label-flip rates: `rho_pos` is the probability that a
/// true +1 label is observed as -1, `rho_neg` the reverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRates {
    pub rho_pos: f64,
    pub rho_neg: f64,
}

impl NoiseRates {
    /// Equal flip rates in both directions.
    pub fn symmetric(rho: f64) -> Self {
        NoiseRates {
            rho_pos: rho,
            rho_neg: rho,
        }
    }

    /// No noise: the robust loss degenerates to the plain squared loss.
    pub fn none() -> Self {
        Self::symmetric(0.0)
    }

    /// Sum of the two rates (must stay below 1 for the correction to be
    /// defined).
    pub fn total(&self) -> f64 {
        self.rho_pos + self.rho_neg
    }

    fn validate(&self) -> Result<()> {
        let ok = self.rho_pos.is_finite()
            && self.rho_neg.is_finite()
            && self.rho_pos >= 0.0
            && self.rho_neg >= 0.0
            && self.total() < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "noise rates must be >= 0 with rho_pos + rho_neg < 1, got ({}, {})",
                self.rho_pos, self.rho_neg
            )))
        }
    }
}

/// Noise-corrected squared loss of a prediction against an observed label.
///
/// With `ell(y) = (pred - y)^2`, the corrected loss is
///
/// ```text
///   ((1 - rho_{-y}) * ell(y) - rho_y * ell(-y)) / (1 - rho_pos - rho_neg)
/// ```
///
/// whose expectation under the flip process equals the clean loss:
/// `(1 - rho_y) * corrected(y) + rho_y * corrected(-y) = ell(y)`.
pub fn robust_squared_loss(pred: f64, y: f64, rates: &NoiseRates) -> Result<f64> {
    if y != 1.0 && y != -1.0 {
        return Err(Error::InvalidLabel { index: 0, value: y });
    }
    rates.validate()?;
    let (rho_own, rho_other) = if y > 0.0 {
        (rates.rho_pos, rates.rho_neg)
    } else {
        (rates.rho_neg, rates.rho_pos)
    };
    let denom = 1.0 - rates.rho_pos - rates.rho_neg;
    let r_own = pred - y;
    let r_other = pred + y;
    Ok(((1.0 - rho_other) * (r_own * r_own) - rho_own * (r_other * r_other)) / denom)
}

/// Settings for the robust-loss trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlsConfig {
    pub rates: NoiseRates,
    /// Fixed step size of full-batch gradient descent.
    pub learning_rate: f64,
    /// Exact number of gradient steps (no convergence test).
    pub iters: usize,
}

/// Train a linear model on the mean noise-corrected squared loss by
/// full-batch gradient descent from the zero model.
///
/// With zero rates this is bit-for-bit plain least-squares gradient
/// descent. Errors if the objective leaves `[-1e12, 1e12]` (divergence —
/// the fixed step size is too large for the data scale).
pub fn train_rls(data: &LabeledDataset, cfg: &RlsConfig) -> Result<LinearClassifier> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("cannot train on zero rows".into()));
    }
    cfg.rates.validate()?;
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "learning_rate must be positive, got {}",
            cfg.learning_rate
        )));
    }
    let n = data.len();
    let d = data.dim();
    let nf = n as f64;
    let denom = 1.0 - cfg.rates.rho_pos - cfg.rates.rho_neg;

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut gw = vec![0.0; d];
    for _ in 0..cfg.iters {
        gw.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        let mut obj_sum = 0.0;
        for (x, y) in data.iter() {
            let p = dot(&w, x) + b;
            let (rho_own, rho_other) = if y > 0.0 {
                (cfg.rates.rho_pos, cfg.rates.rho_neg)
            } else {
                (cfg.rates.rho_neg, cfg.rates.rho_pos)
            };
            let r_own = p - y;
            let r_other = p + y;
            obj_sum +=
                ((1.0 - rho_other) * (r_own * r_own) - rho_own * (r_other * r_other)) / denom;
            let c = ((1.0 - rho_other) * (2.0 * r_own) - rho_own * (2.0 * r_other)) / denom;
            for (g, &xj) in gw.iter_mut().zip(x) {
                *g += c * xj;
            }
            gb += c;
        }
        let obj = obj_sum / nf;
        if !obj.is_finite() || obj.abs() > 1e12 {
            return Err(Error::Divergence { objective: obj });
        }
        for g in gw.iter_mut() {
            *g /= nf;
        }
        gb /= nf;
        for (wj, &gj) in w.iter_mut().zip(gw.iter()) {
            *wj -= cfg.learning_rate * gj;
        }
        b -= cfg.learning_rate * gb;
    }
    Ok(LinearClassifier { w, b })
}

/// The flip rates the noise-rate search draws from.
const NOISE_LEVELS: [f64; 5] = [0.0, 0.05, 0.1, 0.15, 0.2];

/// Symmetric flip-rate grid (`rho_pos = rho_neg`), 5 candidates — the
/// right search space when the corruption flips both classes equally.
pub fn default_noise_grid() -> Vec<NoiseRates> {
    NOISE_LEVELS.iter().map(|&r| NoiseRates::symmetric(r)).collect()
}

/// Full asymmetric product grid over the same levels, 25 candidates — for
/// corruptions that may hit one class harder than the other.
pub fn full_noise_grid() -> Vec<NoiseRates> {
    NOISE_LEVELS
        .iter()
        .flat_map(|&rp| NOISE_LEVELS.iter().map(move |&rn| NoiseRates { rho_pos: rp, rho_neg: rn }))
        .collect()
}

/// Select flip rates from `candidates` by k-fold cross-validated
/// classification error of the robust-loss trainer; ties prefer the
/// smaller total rate (then the smaller `rho_pos`).
pub fn cv_noise_rates(
    data: &LabeledDataset,
    folds: usize,
    candidates: &[NoiseRates],
    learning_rate: f64,
    iters: usize,
) -> Result<NoiseRates> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!(
            "cross-validation needs >= 2 folds, got {folds}"
        )));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("empty noise-rate grid".into()));
    }
    let n = data.len();
    if n < folds {
        return Err(Error::InvalidConfig(format!(
            "{folds} folds need at least {folds} rows, got {n}"
        )));
    }
    let mut order: Vec<NoiseRates> = candidates.to_vec();
    order.sort_by(|a, b| {
        (a.total(), a.rho_pos)
            .partial_cmp(&(b.total(), b.rho_pos))
            .unwrap()
    });

    let mut best: Option<(f64, NoiseRates)> = None;
    for rates in order {
        rates.validate()?;
        let mut wrong = 0usize;
        for fold in 0..folds {
            let lo = fold * n / folds;
            let hi = (fold + 1) * n / folds;
            let holdout: Vec<usize> = (lo..hi).collect();
            let rest: Vec<usize> = (0..lo).chain(hi..n).collect();
            let model = train_rls(
                &data.subset(&rest),
                &RlsConfig {
                    rates,
                    learning_rate,
                    iters,
                },
            )?;
            let held = data.subset(&holdout);
            wrong += (crate::linear_model::test_error(&model, &held)? * held.len() as f64).round()
                as usize;
        }
        let err = wrong as f64 / n as f64;
        // Strict improvement required: the candidate order already prefers
        // smaller rates on ties.
        if best.is_none_or(|(be, _)| err < be) {
            best = Some((err, rates));
        }
    }
    Ok(best.expect("grid is nonempty").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_gaussian_binary, GaussianSpec};
    use crate::rng;
    use rand_core::Rng;

    fn two_blob(seed: u64, n_per_class: usize) -> LabeledDataset {
        gen_gaussian_binary(&GaussianSpec {
            mean_pos: vec![1.5, 0.0],
            mean_neg: vec![-1.5, 0.0],
            cov_scale: 0.6,
            n_per_class,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn ecdf_threshold_nearest_rank_examples() {
        let scores: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        assert_eq!(ecdf_threshold(&scores, 0.95).unwrap(), 95.0);
        assert_eq!(ecdf_threshold(&scores, 1.0).unwrap(), 100.0);
        assert_eq!(ecdf_threshold(&scores, 0.001).unwrap(), 1.0);
        // Integer products that float multiplication nudges upward must not
        // shift the rank: 0.07 * 100 rounds to just above 7.
        assert_eq!(ecdf_threshold(&scores, 0.07).unwrap(), 7.0);
        assert_eq!(ecdf_threshold(&[42.0], 0.5).unwrap(), 42.0);
        // Order-independence.
        let mut shuffled = scores.clone();
        shuffled.reverse();
        assert_eq!(ecdf_threshold(&shuffled, 0.95).unwrap(), 95.0);
    }

    #[test]
    fn ecdf_threshold_validation() {
        assert!(ecdf_threshold(&[], 0.5).is_err());
        assert!(ecdf_threshold(&[1.0], 0.0).is_err());
        assert!(ecdf_threshold(&[1.0], 1.1).is_err());
        assert!(ecdf_threshold(&[f64::NAN], 0.5).is_err());
    }

    fn all_kinds() -> Vec<ScorerConfig> {
        use ScorerKind::*;
        // Small k/s so the tiny trusted sets in these tests are viable.
        let mut cfgs = Vec::new();
        for kind in [Knn, SampledKnn, Sp, OcSvm, Lof] {
            let mut c = ScorerConfig::new(kind);
            c.k = 3;
            c.s = 10;
            c.seed = 5;
            cfgs.push(c);
        }
        cfgs
    }

    #[test]
    fn trusted_retention_meets_alpha() {
        let trusted = two_blob(31, 40);
        for cfg in all_kinds() {
            for alpha in [0.8, 0.9, 0.95] {
                let defence = fit_defence(&trusted, &cfg, alpha).unwrap();
                let (kept, _) = defence.filter(&trusted).unwrap();
                for label in [1.0, -1.0] {
                    let total = trusted.indices_with_label(label).len() as f64;
                    let kept_c = kept.indices_with_label(label).len() as f64;
                    assert!(
                        kept_c / total >= alpha - 1.0 / total - 1e-12,
                        "{}: kept {kept_c}/{total} at alpha {alpha}",
                        cfg.kind.name()
                    );
                }
            }
        }
    }

    #[test]
    fn filtering_is_idempotent() {
        let trusted = two_blob(32, 30);
        let mixed = two_blob(33, 25);
        for cfg in all_kinds() {
            let defence = fit_defence(&trusted, &cfg, 0.9).unwrap();
            let (once, removed_once) = defence.filter(&mixed).unwrap();
            let (twice, removed_twice) = defence.filter(&once).unwrap();
            assert_eq!(once, twice, "{} second pass changed the set", cfg.kind.name());
            assert!(removed_twice.is_empty());
            assert!(removed_once.len() <= mixed.len());
        }
    }

    #[test]
    fn larger_alpha_keeps_supersets() {
        let trusted = two_blob(34, 30);
        let mixed = two_blob(35, 25);
        for cfg in all_kinds() {
            let lo = fit_defence(&trusted, &cfg, 0.7).unwrap();
            let hi = fit_defence(&trusted, &cfg, 0.95).unwrap();
            let (_, removed_lo) = lo.filter(&mixed).unwrap();
            let (_, removed_hi) = hi.filter(&mixed).unwrap();
            // Everything the permissive defence removes, the strict one
            // removes too.
            for i in &removed_hi {
                assert!(
                    removed_lo.contains(i),
                    "{}: alpha 0.95 removed {i} but alpha 0.7 kept it",
                    cfg.kind.name()
                );
            }
        }
    }

    #[test]
    fn filter_separates_planted_outliers() {
        // Trusted blobs plus a handful of absurdly remote points: every
        // distance-based detector must flag the plants without losing much
        // genuine data.
        let trusted = two_blob(36, 40);
        let mut attacked = two_blob(37, 20);
        for i in 0..5 {
            attacked
                .push_row(&[60.0 + i as f64, -55.0], if i % 2 == 0 { 1.0 } else { -1.0 })
                .unwrap();
        }
        for cfg in all_kinds() {
            if cfg.kind == ScorerKind::OcSvm {
                // The linear one-class margin is a half-space, not a ball;
                // plants on the inlier side of the hyperplane are invisible
                // to it by design, so it gets no guarantee here.
                continue;
            }
            let defence = fit_defence(&trusted, &cfg, 0.9).unwrap();
            let (kept, removed) = defence.filter(&attacked).unwrap();
            for i in 40..45 {
                assert!(
                    removed.contains(&i),
                    "{} kept planted outlier {i}",
                    cfg.kind.name()
                );
            }
            // The sampling detectors score fresh draws with some variance,
            // so demand only that the bulk of genuine data survives.
            assert!(kept.len() >= 26, "{} kept only {}", cfg.kind.name(), kept.len());
        }
    }

    #[test]
    fn fit_defence_needs_both_classes() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        let one_class = LabeledDataset::new(rows, vec![1.0; 4]).unwrap();
        let cfg = ScorerConfig {
            k: 1,
            ..ScorerConfig::new(ScorerKind::Knn)
        };
        assert!(matches!(
            fit_defence(&one_class, &cfg, 0.9),
            Err(Error::EmptyDataset(_))
        ));
        assert!(fit_defence(&two_blob(1, 5), &cfg, 1.5).is_err());
    }

    #[test]
    fn summary_reports_fitted_state() {
        let trusted = two_blob(38, 20);
        let cfg = ScorerConfig {
            k: 3,
            ..ScorerConfig::new(ScorerKind::Knn)
        };
        let defence = fit_defence(&trusted, &cfg, 0.9).unwrap();
        let s = defence.summary();
        assert_eq!(s.detector, "knn");
        assert_eq!(s.alpha, 0.9);
        assert_eq!(s.n_trusted_pos, 20);
        assert_eq!(s.n_trusted_neg, 20);
        assert_eq!(s.threshold_pos, defence.threshold(1.0));
        assert_eq!(s.threshold_neg, defence.threshold(-1.0));
        // Thresholds are actual trusted self-scores, hence finite.
        assert!(s.threshold_pos.is_finite() && s.threshold_neg.is_finite());
    }

    #[test]
    fn robust_loss_unbiasedness_identity() {
        // (1 - rho_y) * corrected(y) + rho_y * corrected(-y) == plain(y),
        // across a big grid of random predictions, labels, and rates.
        let mut prng = rng::rng_from_seed(2024);
        for trial in 0..1000 {
            let pred = (rng::unit_halfopen(&mut prng) - 0.5) * 8.0;
            let y = if prng.next_u64().is_multiple_of(2) { 1.0 } else { -1.0 };
            let rho_pos = rng::unit_halfopen(&mut prng) * 0.45;
            let rho_neg = rng::unit_halfopen(&mut prng) * 0.45;
            let rates = NoiseRates { rho_pos, rho_neg };
            let rho_own = if y > 0.0 { rho_pos } else { rho_neg };
            let lhs = (1.0 - rho_own) * robust_squared_loss(pred, y, &rates).unwrap()
                + rho_own * robust_squared_loss(pred, -y, &rates).unwrap();
            let plain = (pred - y) * (pred - y);
            assert!(
                (lhs - plain).abs() <= 1e-12,
                "trial {trial}: {lhs} vs {plain}"
            );
        }
    }

    #[test]
    fn robust_loss_hand_value() {
        // pred = 0.5, y = +1, rho = 0.2 both ways:
        // (0.8 * 0.25 - 0.2 * 2.25) / 0.6 = -5/12. Negative values are
        // legitimate for the corrected loss.
        let got = robust_squared_loss(0.5, 1.0, &NoiseRates::symmetric(0.2)).unwrap();
        assert!((got - (-5.0 / 12.0)).abs() <= 1e-15, "got {got}");
        // Zero rates collapse to the plain squared loss exactly.
        let plain = robust_squared_loss(0.3, -1.0, &NoiseRates::none()).unwrap();
        assert_eq!(plain, (0.3_f64 + 1.0) * (0.3 + 1.0));
    }

    #[test]
    fn symmetric_rates_on_symmetric_data_rescale_the_minimizer() {
        // On {(-1,-1), (+1,+1)} with rho_pos = rho_neg = rho, expanding the
        // corrected loss gives l(y) - (4 rho / (1 - 2 rho)) p y: the extra
        // term is linear in the prediction, so the minimizer keeps b = 0
        // and the decision boundary, but the weight grows to
        // w0 / (1 - 2 rho). (The correction is unbiased for data whose
        // labels really flip at rate rho; applied to clean data it
        // over-corrects by exactly this factor.)
        let data = LabeledDataset::new(vec![vec![-1.0], vec![1.0]], vec![-1.0, 1.0]).unwrap();
        let rho = 0.2;
        let noisy = train_rls(
            &data,
            &RlsConfig {
                rates: NoiseRates::symmetric(rho),
                learning_rate: 0.1,
                iters: 4000,
            },
        )
        .unwrap();
        let plain = train_rls(
            &data,
            &RlsConfig {
                rates: NoiseRates::none(),
                learning_rate: 0.1,
                iters: 4000,
            },
        )
        .unwrap();
        assert!((plain.w[0] - 1.0).abs() <= 1e-4, "plain w = {}", plain.w[0]);
        assert!(
            (noisy.w[0] - plain.w[0] / (1.0 - 2.0 * rho)).abs() <= 1e-4,
            "noisy w = {}, expected {}",
            noisy.w[0],
            plain.w[0] / (1.0 - 2.0 * rho)
        );
        assert!(plain.b.abs() <= 1e-6 && noisy.b.abs() <= 1e-6);
    }

    #[test]
    fn noise_grids_have_the_documented_shapes() {
        let sym = default_noise_grid();
        assert_eq!(sym.len(), 5);
        assert!(sym.iter().all(|r| r.rho_pos == r.rho_neg));
        let full = full_noise_grid();
        assert_eq!(full.len(), 25);
        assert!(full.contains(&NoiseRates { rho_pos: 0.05, rho_neg: 0.2 }));
        assert!(full.iter().all(|r| r.total() < 1.0));
    }

    #[test]
    fn robust_loss_validation() {
        let ok = NoiseRates::symmetric(0.2);
        assert!(robust_squared_loss(0.5, 0.0, &ok).is_err());
        assert!(robust_squared_loss(0.5, 1.0, &NoiseRates::symmetric(0.5)).is_err());
        assert!(robust_squared_loss(0.5, 1.0, &NoiseRates { rho_pos: -0.1, rho_neg: 0.0 }).is_err());
        assert!(robust_squared_loss(0.5, 1.0, &ok).is_ok());
    }

    #[test]
    fn zero_rates_training_is_bitwise_plain_gradient_descent() {
        let data = two_blob(40, 15);
        let cfg = RlsConfig {
            rates: NoiseRates::none(),
            learning_rate: 0.1,
            iters: 250,
        };
        let robust = train_rls(&data, &cfg).unwrap();

        // Mirror implementation: plain squared-loss full-batch GD with the
        // same operation order.
        let n = data.len();
        let d = data.dim();
        let nf = n as f64;
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut gw = vec![0.0; d];
        for _ in 0..cfg.iters {
            gw.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for (x, y) in data.iter() {
                let p = dot(&w, x) + b;
                let c = 2.0 * (p - y);
                for (g, &xj) in gw.iter_mut().zip(x) {
                    *g += c * xj;
                }
                gb += c;
            }
            for g in gw.iter_mut() {
                *g /= nf;
            }
            gb /= nf;
            for (wj, &gj) in w.iter_mut().zip(gw.iter()) {
                *wj -= cfg.learning_rate * gj;
            }
            b -= cfg.learning_rate * gb;
        }

        assert_eq!(robust.b.to_bits(), b.to_bits(), "bias differs");
        for j in 0..d {
            assert_eq!(
                robust.w[j].to_bits(),
                w[j].to_bits(),
                "w[{j}] differs: {} vs {}",
                robust.w[j],
                w[j]
            );
        }
    }

    #[test]
    fn zero_iterations_returns_the_zero_model() {
        let data = two_blob(41, 5);
        let model = train_rls(
            &data,
            &RlsConfig {
                rates: NoiseRates::symmetric(0.1),
                learning_rate: 0.1,
                iters: 0,
            },
        )
        .unwrap();
        assert!(model.w.iter().all(|&v| v == 0.0));
        assert_eq!(model.b, 0.0);
    }

    #[test]
    fn oversized_steps_diverge_with_an_error() {
        let data = two_blob(42, 10);
        let err = train_rls(
            &data,
            &RlsConfig {
                rates: NoiseRates::none(),
                learning_rate: 1e6,
                iters: 100,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn rls_learns_the_separable_problem() {
        let data = two_blob(43, 30);
        let model = train_rls(
            &data,
            &RlsConfig {
                rates: NoiseRates::symmetric(0.1),
                learning_rate: 0.1,
                iters: 600,
            },
        )
        .unwrap();
        assert!(crate::linear_model::test_error(&model, &data).unwrap() <= 0.05);
    }

    #[test]
    fn noise_rate_cv_picks_from_grid_deterministically() {
        let data = two_blob(44, 20);
        let grid = default_noise_grid();
        let a = cv_noise_rates(&data, 4, &grid, 0.1, 150).unwrap();
        let b = cv_noise_rates(&data, 4, &grid, 0.1, 150).unwrap();
        assert_eq!(a, b);
        assert!(grid.contains(&a));
        // On clean, easily separable data every candidate classifies
        // perfectly, so the tie must resolve to the smallest total rate.
        assert_eq!(a, NoiseRates::none());
    }

    #[test]
    fn noise_rate_cv_validation() {
        let data = two_blob(45, 10);
        assert!(cv_noise_rates(&data, 1, &default_noise_grid(), 0.1, 10).is_err());
        assert!(cv_noise_rates(&data, 4, &[], 0.1, 10).is_err());
    }
}
