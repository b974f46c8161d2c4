//! Cross-module property tests: formatting fixpoints and whole-pipeline
//! invariants on randomized small configurations.

use proptest::prelude::*;

use poisonlab::dataset::{GaussianSpec, SplitSpec};
use poisonlab::harness::{
    parse_report_csv, run_experiment, AttackSpec, DatasetSpec, DefenceSpec, ExperimentConfig,
    ExperimentReport, LambdaPolicy, ReportRow,
};
use poisonlab::outlier::{ScorerConfig, ScorerKind};

fn finite_unit() -> impl Strategy<Value = f64> {
    (0u32..=1_000_000).prop_map(|v| v as f64 / 1_000_000.0)
}

fn wide_float() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(0.0),
        (-1e12f64..1e12).prop_filter("finite", |v| v.is_finite()),
        (-1.0f64..1.0),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Emitting at six significant digits is a fixpoint: parse and
    /// re-emit reproduces the CSV byte for byte.
    #[test]
    fn report_six_digit_format_is_a_fixpoint(
        alpha in proptest::option::of(finite_unit()),
        fraction in finite_unit(),
        mean in wide_float(),
        std in wide_float(),
        removed_p in finite_unit(),
        removed_g in finite_unit(),
        wall in 0.0f64..1e6,
    ) {
        let report = ExperimentReport {
            rows: vec![ReportRow {
                dataset: "synthetic".into(),
                attack: "rlf".into(),
                defence: "knn".into(),
                alpha,
                fraction,
                mean_test_error: mean,
                std_test_error: std,
                mean_removed_poison_fraction: removed_p,
                mean_removed_genuine_fraction: removed_g,
                wall_time: wall,
            }],
            failures: Vec::new(),
        };
        let once = report.to_csv();
        let parsed = parse_report_csv(&once).unwrap();
        prop_assert_eq!(parsed.to_csv(), once);
    }
}

fn small_experiment(
    attack_seed: u64,
    base_seed: u64,
    fraction: f64,
    alpha: f64,
) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSpec::Synthetic {
            gaussian: GaussianSpec {
                mean_pos: vec![1.4, 0.2],
                mean_neg: vec![-1.4, -0.2],
                cov_scale: 0.7,
                n_per_class: 50,
                seed: 13,
            },
        },
        split: SplitSpec {
            n_train: 30,
            n_od_train: 30,
            n_val: 20,
            seed: 0,
        },
        attack: AttackSpec::Rlf { seed: attack_seed },
        poison_fractions: vec![fraction],
        defence: DefenceSpec::Detector {
            scorer: ScorerConfig {
                k: 3,
                ..ScorerConfig::new(ScorerKind::Knn)
            },
            alpha,
        },
        repetitions: 1,
        inner_repetitions: 1,
        base_seed,
        lambda_policy: LambdaPolicy::Fixed { lambda: 0.05 },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Any valid small pipeline yields in-range aggregates, and running it
    /// twice reproduces every field except wall time.
    #[test]
    fn pipelines_are_bounded_and_deterministic(
        attack_seed in 0u64..1000,
        base_seed in 0u64..1000,
        fraction in prop_oneof![Just(0.0), Just(0.1), Just(0.2), Just(0.3)],
        alpha in prop_oneof![Just(0.90), Just(0.95), Just(0.99)],
    ) {
        let cfg = small_experiment(attack_seed, base_seed, fraction, alpha);
        let a = run_experiment(&cfg).unwrap();
        prop_assert!(a.failures.is_empty(), "failures: {:?}", a.failures);
        prop_assert_eq!(a.rows.len(), 1);
        let row = &a.rows[0];
        prop_assert!((0.0..=1.0).contains(&row.mean_test_error));
        prop_assert!(row.std_test_error >= 0.0);
        prop_assert!((0.0..=1.0).contains(&row.mean_removed_poison_fraction));
        prop_assert!((0.0..=1.0).contains(&row.mean_removed_genuine_fraction));
        if fraction == 0.0 {
            prop_assert_eq!(row.mean_removed_poison_fraction, 0.0);
        }

        let b = run_experiment(&cfg).unwrap();
        let (mut x, mut y) = (a.rows[0].clone(), b.rows[0].clone());
        x.wall_time = 0.0;
        y.wall_time = 0.0;
        prop_assert_eq!(x, y);
    }
}
