"""Poisoning attacks and outlier defences for lasso-style linear classifiers.

Thin Python surface over the Rust core. Datasets are ``list[list[float]]``
features plus ``list[float]`` labels in {-1.0, +1.0}; models travel as
``(weights, bias)`` tuples.
"""

from ._poisonlab import (
    AttackResult,
    Defence,
    cv_lambda,
    cv_noise_rates,
    decision_values,
    gen_gaussian,
    half_mse,
    ilf,
    rlf,
    run_experiment,
    run_optimal_attack,
    test_error,
    train_lasso,
    train_rls,
    trajectory_demo,
)

__all__ = [
    "AttackResult",
    "Defence",
    "cv_lambda",
    "cv_noise_rates",
    "decision_values",
    "gen_gaussian",
    "half_mse",
    "ilf",
    "rlf",
    "run_experiment",
    "run_optimal_attack",
    "test_error",
    "train_lasso",
    "train_rls",
    "trajectory_demo",
]
