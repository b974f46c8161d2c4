//! Per-point outlier scorers.
//!
//! Higher scores mean more anomalous. Five scorers share one interface:
//!
//! * `knn` — distance to the k-th nearest neighbour in the reference set;
//! * `sampled_knn` — the same, but inside a fresh size-`s` subsample drawn
//!   (without replacement) per query;
//! * `sp` — distance to the nearest point of one size-`s` sample drawn with
//!   replacement at fit time;
//! * `ocsvm` — a linear one-class SVM margin, `rho - w . x`;
//! * `lof` — the local outlier factor.
//!
//! The distance-based scorers treat a query that is bitwise-equal to a
//! reference row as that row: `knn` and `sampled_knn` drop one equal
//! occurrence before ranking, and `lof` returns the member's fitted factor.
//! This keeps self-scoring (used for threshold calibration) and outside
//! queries consistent: scoring the reference set itself never counts a
//! point as its own nearest neighbour.
//!
//! `sampled_knn` derives its per-query subsample from the fit seed and a
//! content hash of the query, so identical queries always see the same
//! sample (scores are pure functions of the query) while distinct queries
//! get fresh draws.

mod lof;
mod ocsvm;

pub use lof::LofModel;
pub use ocsvm::{fit_ocsvm_loo, fit_ocsvm_with_nu, OcSvmModel};

use serde::{Deserialize, Serialize};

use crate::dataset::Features;
use crate::error::{Error, Result};
use crate::rng;

/// Which scorer to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Knn,
    SampledKnn,
    Sp,
    OcSvm,
    Lof,
}

impl ScorerKind {
    /// Short stable name used in configs and reports.
    pub fn name(self) -> &'static str {
        match self {
            ScorerKind::Knn => "knn",
            ScorerKind::SampledKnn => "sampled_knn",
            ScorerKind::Sp => "sp",
            ScorerKind::OcSvm => "ocsvm",
            ScorerKind::Lof => "lof",
        }
    }
}

/// Scorer settings; the irrelevant fields are ignored by each kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    pub kind: ScorerKind,
    /// Neighbour rank for `knn` / `sampled_knn` / `lof`.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Sample size for `sampled_knn` / `sp`.
    #[serde(default = "default_s")]
    pub s: usize,
    /// Seed for the sampling scorers.
    #[serde(default)]
    pub seed: u64,
    /// Candidate `nu` values for the one-class SVM's leave-one-out sweep.
    #[serde(default = "default_nu_grid")]
    pub nu_grid: Vec<f64>,
}

fn default_k() -> usize {
    5
}
fn default_s() -> usize {
    20
}
fn default_nu_grid() -> Vec<f64> {
    vec![0.01, 0.05, 0.1, 0.2, 0.5]
}

impl ScorerConfig {
    /// Defaults for the given kind: `k = 5`, `s = 20`, seed 0, and a
    /// five-point `nu` grid.
    pub fn new(kind: ScorerKind) -> Self {
        ScorerConfig {
            kind,
            k: default_k(),
            s: default_s(),
            seed: 0,
            nu_grid: default_nu_grid(),
        }
    }

    /// Same config with a different seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// A fitted scorer. Variant fields are exposed so tests can audit the
/// fitted state directly.
#[derive(Debug, Clone)]
pub enum OutlierScorer {
    Knn {
        train: Features,
        k: usize,
    },
    SampledKnn {
        train: Features,
        k: usize,
        s: usize,
        seed: u64,
    },
    Sp {
        /// The fixed sample drawn (with replacement) at fit time.
        sample: Features,
    },
    OcSvm(OcSvmModel),
    Lof(LofModel),
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// `k`-th smallest value of a scratch distance buffer.
fn kth_smallest(dists: &mut [f64], k: usize) -> f64 {
    let (_, kth, _) = dists.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
    *kth
}

/// Fit a scorer of the configured kind on a features-only reference set.
pub fn fit_scorer(cfg: &ScorerConfig, data: &Features) -> Result<OutlierScorer> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("cannot fit a scorer on zero rows".into()));
    }
    match cfg.kind {
        ScorerKind::Knn => {
            check_k(cfg.k)?;
            if data.len() <= cfg.k {
                return Err(Error::InsufficientData(format!(
                    "knn scorer with k = {} needs more than {} rows, got {}",
                    cfg.k,
                    cfg.k,
                    data.len()
                )));
            }
            Ok(OutlierScorer::Knn {
                train: data.clone(),
                k: cfg.k,
            })
        }
        ScorerKind::SampledKnn => {
            check_k(cfg.k)?;
            if cfg.s < cfg.k {
                return Err(Error::InvalidConfig(format!(
                    "sampled_knn needs s >= k, got s = {} and k = {}",
                    cfg.s, cfg.k
                )));
            }
            if cfg.s > data.len() {
                return Err(Error::InsufficientData(format!(
                    "sampled_knn draws {} rows without replacement but only {} exist",
                    cfg.s,
                    data.len()
                )));
            }
            Ok(OutlierScorer::SampledKnn {
                train: data.clone(),
                k: cfg.k,
                s: cfg.s,
                seed: cfg.seed,
            })
        }
        ScorerKind::Sp => {
            if cfg.s == 0 {
                return Err(Error::InvalidConfig("sp needs a sample size s >= 1".into()));
            }
            // With replacement: s may exceed the number of rows.
            let mut prng = rng::rng_from_seed(cfg.seed);
            let idx = rng::sample_with_replacement(&mut prng, data.len(), cfg.s);
            Ok(OutlierScorer::Sp {
                sample: data.subset(&idx),
            })
        }
        ScorerKind::OcSvm => Ok(OutlierScorer::OcSvm(fit_ocsvm_loo(data, &cfg.nu_grid)?)),
        ScorerKind::Lof => {
            check_k(cfg.k)?;
            Ok(OutlierScorer::Lof(LofModel::fit(data, cfg.k)?))
        }
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig("neighbour count k must be >= 1".into()));
    }
    Ok(())
}

impl OutlierScorer {
    /// The scorer's kind tag.
    pub fn kind(&self) -> ScorerKind {
        match self {
            OutlierScorer::Knn { .. } => ScorerKind::Knn,
            OutlierScorer::SampledKnn { .. } => ScorerKind::SampledKnn,
            OutlierScorer::Sp { .. } => ScorerKind::Sp,
            OutlierScorer::OcSvm(_) => ScorerKind::OcSvm,
            OutlierScorer::Lof(_) => ScorerKind::Lof,
        }
    }

    /// Dimensionality the scorer expects.
    pub fn dim(&self) -> usize {
        match self {
            OutlierScorer::Knn { train, .. } => train.dim(),
            OutlierScorer::SampledKnn { train, .. } => train.dim(),
            OutlierScorer::Sp { sample } => sample.dim(),
            OutlierScorer::OcSvm(m) => m.w.len(),
            OutlierScorer::Lof(m) => m.dim(),
        }
    }

    /// Outlier score of `x` (higher = more anomalous).
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        match self {
            OutlierScorer::Knn { train, k } => {
                let mut dists = Vec::with_capacity(train.len());
                let mut excluded = false;
                for i in 0..train.len() {
                    let row = train.row(i);
                    if !excluded && row == x {
                        excluded = true;
                        continue;
                    }
                    dists.push(euclidean(row, x));
                }
                Ok(kth_smallest(&mut dists, *k))
            }
            OutlierScorer::SampledKnn { train, k, s, seed } => {
                let mut prng = rng::rng_from_seed(rng::mix_seed(*seed, rng::hash_row(x)));
                let idx = rng::sample_without_replacement(&mut prng, train.len(), *s);
                let mut dists = Vec::with_capacity(*s);
                let mut excluded = false;
                for &i in &idx {
                    let row = train.row(i);
                    if !excluded && row == x {
                        excluded = true;
                        continue;
                    }
                    dists.push(euclidean(row, x));
                }
                if dists.len() < *k {
                    return Err(Error::InsufficientData(format!(
                        "sampled_knn: {} distances left after self-exclusion, need {k}",
                        dists.len()
                    )));
                }
                Ok(kth_smallest(&mut dists, *k))
            }
            OutlierScorer::Sp { sample } => {
                let mut best = f64::INFINITY;
                for i in 0..sample.len() {
                    best = best.min(euclidean(sample.row(i), x));
                }
                Ok(best)
            }
            OutlierScorer::OcSvm(m) => Ok(m.score(x)),
            OutlierScorer::Lof(m) => Ok(m.score(x)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;

    fn feats(rows: &[&[f64]]) -> Features {
        Features::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn gaussian_features(seed: u64, n: usize, d: usize) -> Features {
        let spec = crate::dataset::GaussianSpec {
            mean_pos: vec![0.5; d],
            mean_neg: vec![-0.5; d],
            cov_scale: 1.0,
            n_per_class: n / 2 + 1,
            seed,
        };
        let data = crate::dataset::gen_gaussian_binary(&spec).unwrap();
        Features::from_labeled(&data).subset(&(0..n).collect::<Vec<_>>())
    }

    #[test]
    fn knn_hand_instance() {
        let train = feats(&[&[0.0], &[3.0], &[4.0]]);
        let k1 = fit_scorer(&ScorerConfig { k: 1, ..ScorerConfig::new(ScorerKind::Knn) }, &train).unwrap();
        assert_eq!(k1.score(&[5.0]).unwrap(), 1.0);
        let k2 = fit_scorer(&ScorerConfig { k: 2, ..ScorerConfig::new(ScorerKind::Knn) }, &train).unwrap();
        assert_eq!(k2.score(&[5.0]).unwrap(), 2.0);
        // Member query: 3.0 excludes itself, nearest other is 4.0.
        assert_eq!(k1.score(&[3.0]).unwrap(), 1.0);
    }

    #[test]
    fn knn_matches_brute_oracle() {
        for seed in 0..4 {
            let train = gaussian_features(seed, 30, 3);
            let cfg = ScorerConfig { k: 5, ..ScorerConfig::new(ScorerKind::Knn) };
            let scorer = fit_scorer(&cfg, &train).unwrap();
            // Outside queries.
            let queries = gaussian_features(seed + 100, 10, 3);
            for i in 0..queries.len() {
                let q = queries.row(i);
                let got = scorer.score(q).unwrap();
                let want = oracles::knn_distance_brute(&train, q, 5, true);
                assert!((got - want).abs() < 1e-12, "query {i}: {got} vs {want}");
            }
            // Member queries exercise the self-exclusion path.
            for i in 0..train.len() {
                let q = train.row(i).to_vec();
                let got = scorer.score(&q).unwrap();
                let want = oracles::knn_distance_brute(&train, &q, 5, true);
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn knn_translation_invariance() {
        let train = gaussian_features(9, 20, 2);
        let shift = [13.5, -7.25];
        let shifted = Features::from_rows(
            (0..train.len())
                .map(|i| {
                    train
                        .row(i)
                        .iter()
                        .zip(&shift)
                        .map(|(v, s)| v + s)
                        .collect()
                })
                .collect(),
        )
        .unwrap();
        let cfg = ScorerConfig { k: 3, ..ScorerConfig::new(ScorerKind::Knn) };
        let a = fit_scorer(&cfg, &train).unwrap();
        let b = fit_scorer(&cfg, &shifted).unwrap();
        let q = [0.3, 0.4];
        let q_shift = [0.3 + 13.5, 0.4 - 7.25];
        assert!((a.score(&q).unwrap() - b.score(&q_shift).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn sampled_knn_is_a_pure_function_of_the_query() {
        let train = gaussian_features(3, 40, 2);
        let cfg = ScorerConfig { k: 5, s: 20, seed: 7, ..ScorerConfig::new(ScorerKind::SampledKnn) };
        let scorer = fit_scorer(&cfg, &train).unwrap();
        let q = [0.1, 0.2];
        let s1 = scorer.score(&q).unwrap();
        let s2 = scorer.score(&q).unwrap();
        assert_eq!(s1, s2);
        // A second scorer with the same seed agrees; different seed differs
        // (on at least some queries).
        let scorer2 = fit_scorer(&cfg, &train).unwrap();
        assert_eq!(scorer2.score(&q).unwrap(), s1);
        let other = fit_scorer(&cfg.clone().with_seed(8), &train).unwrap();
        let queries = gaussian_features(5, 20, 2);
        let diffs = (0..queries.len())
            .filter(|&i| {
                other.score(queries.row(i)).unwrap() != scorer.score(queries.row(i)).unwrap()
            })
            .count();
        assert!(diffs > 0, "changing the seed never changed a score");
    }

    #[test]
    fn sampled_knn_with_full_sample_equals_knn() {
        let train = gaussian_features(11, 25, 3);
        let exact = fit_scorer(
            &ScorerConfig { k: 5, ..ScorerConfig::new(ScorerKind::Knn) },
            &train,
        )
        .unwrap();
        let sampled = fit_scorer(
            &ScorerConfig {
                k: 5,
                s: train.len(),
                seed: 42,
                ..ScorerConfig::new(ScorerKind::SampledKnn)
            },
            &train,
        )
        .unwrap();
        let queries = gaussian_features(12, 15, 3);
        for i in 0..queries.len() {
            let q = queries.row(i);
            assert_eq!(sampled.score(q).unwrap(), exact.score(q).unwrap());
        }
        for i in 0..train.len() {
            let q = train.row(i).to_vec();
            assert_eq!(sampled.score(&q).unwrap(), exact.score(&q).unwrap());
        }
    }

    #[test]
    fn sp_scores_match_its_stored_sample() {
        let train = gaussian_features(21, 10, 2);
        let cfg = ScorerConfig { s: 25, seed: 3, ..ScorerConfig::new(ScorerKind::Sp) };
        // s > number of rows is fine: the sample is drawn with replacement.
        let scorer = fit_scorer(&cfg, &train).unwrap();
        let OutlierScorer::Sp { sample } = &scorer else {
            panic!("wrong kind")
        };
        assert_eq!(sample.len(), 25);
        let queries = gaussian_features(22, 10, 2);
        for i in 0..queries.len() {
            let q = queries.row(i);
            let got = scorer.score(q).unwrap();
            assert!((got - oracles::min_distance_brute(sample, q)).abs() < 1e-12);
            // The sample is a multiset of training rows, so the score is at
            // least the distance to the full set.
            assert!(got >= oracles::min_distance_brute(&train, q) - 1e-12);
        }
        // Fit is deterministic in the seed.
        let again = fit_scorer(&cfg, &train).unwrap();
        let OutlierScorer::Sp { sample: sample2 } = &again else {
            panic!()
        };
        assert_eq!(sample, sample2);
    }

    #[test]
    fn sp_member_distance_is_zero() {
        let train = feats(&[&[1.0, 1.0], &[2.0, 2.0]]);
        let scorer = fit_scorer(
            &ScorerConfig { s: 10, ..ScorerConfig::new(ScorerKind::Sp) },
            &train,
        )
        .unwrap();
        // With 10 draws from 2 rows, both rows are (for this seed) in the
        // sample; a member query sits at distance zero — no self-exclusion.
        assert_eq!(scorer.score(&[1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn fit_validation_errors() {
        let train = feats(&[&[0.0], &[1.0], &[2.0]]);
        // k = 0.
        assert!(fit_scorer(
            &ScorerConfig { k: 0, ..ScorerConfig::new(ScorerKind::Knn) },
            &train
        )
        .is_err());
        // knn needs more than k rows.
        assert!(matches!(
            fit_scorer(
                &ScorerConfig { k: 3, ..ScorerConfig::new(ScorerKind::Knn) },
                &train
            ),
            Err(Error::InsufficientData(_))
        ));
        // sampled_knn: s < k and s > n both rejected.
        assert!(fit_scorer(
            &ScorerConfig { k: 3, s: 2, ..ScorerConfig::new(ScorerKind::SampledKnn) },
            &train
        )
        .is_err());
        assert!(matches!(
            fit_scorer(
                &ScorerConfig { k: 2, s: 4, ..ScorerConfig::new(ScorerKind::SampledKnn) },
                &train
            ),
            Err(Error::InsufficientData(_))
        ));
        // sp: s = 0.
        assert!(fit_scorer(
            &ScorerConfig { s: 0, ..ScorerConfig::new(ScorerKind::Sp) },
            &train
        )
        .is_err());
    }

    #[test]
    fn score_checks_dimensions() {
        let train = gaussian_features(1, 10, 2);
        let scorer = fit_scorer(
            &ScorerConfig { k: 2, ..ScorerConfig::new(ScorerKind::Knn) },
            &train,
        )
        .unwrap();
        assert!(matches!(
            scorer.score(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
