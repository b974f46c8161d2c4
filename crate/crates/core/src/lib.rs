//! Data poisoning attacks on sparse linear classifiers, and the
//! outlier-filtering defences that blunt them.
//!
//! The crate implements one vertical slice of the attack/defence story for
//! binary classification with lasso-style linear models:
//!
//! * [`dataset`] — labelled datasets with ±1 labels, synthetic Gaussian
//!   generation, loaders for the Spambase CSV and MNIST IDX formats, and
//!   deterministic train/validation/test splitting.
//! * [`linear_model`] — squared-loss linear classifiers with an optional L1
//!   penalty, trained by proximal gradient descent, plus cross-validated
//!   regularization selection.
//! * [`attack_optimal`] — the gradient-driven poisoning attack: it appends a
//!   small number of attacker-controlled points to the training set and moves
//!   them, via an implicit gradient of the validation error through the
//!   training problem, to maximally degrade the trained model.
//! * [`attack_flipping`] — cheaper label-flipping baselines (random and
//!   influence-ranked).
//! * [`outlier`] — per-point outlier scorers: k-NN distances (exact and
//!   sampled), distance-to-sample, a linear one-class SVM, and local outlier
//!   factor.
//! * [`defence`] — turns scorers fitted on trusted data into a filtering
//!   defence with per-class empirical-quantile thresholds, and a robust
//!   noise-corrected loss as a filtering-free alternative.
//! * [`harness`] — end-to-end experiment driver producing CSV reports, used
//!   by the `poisonlab` command-line tool.
//!
//! Everything is deterministic given the seeds carried in the various config
//! structs: the same config produces the same models, poison points, and
//! report, bit for bit, on any platform with IEEE-754 doubles.

// The numeric kernels walk several same-length buffers by index; iterator
// rewrites of those loops hide which buffer drives the iteration.
#![allow(clippy::needless_range_loop)]

pub mod attack_flipping;
pub mod attack_optimal;
pub mod dataset;
pub mod defence;
pub mod error;
pub mod harness;
pub mod linear_model;
pub mod oracles;
pub mod outlier;
pub mod rng;

pub use error::{Error, Result};
