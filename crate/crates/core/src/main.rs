//! Command-line front end: experiment runner, the 2-D trajectory demo, and
//! two self-check batteries (gradient vs. finite differences, scorers vs.
//! brute-force oracles).
//!
//! Every failure path prints one machine-readable JSON line to stderr
//! (`{"error": ...}`) and exits nonzero.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use poisonlab::attack_optimal::{choose_initial_points, poison_gradient, TargetMode};
use poisonlab::dataset::{gen_gaussian_binary, Features, GaussianSpec, LabeledDataset};
use poisonlab::harness::{
    emit_report, emit_resolved_config, emit_trajectory_csv, emit_trajectory_summary,
    run_experiment, run_trajectory_demo, ExperimentConfig, Fig1Config,
};
use poisonlab::linear_model::{train_lasso, TrainConfig};
use poisonlab::oracles;
use poisonlab::outlier::{fit_scorer, OutlierScorer, ScorerConfig, ScorerKind};
use poisonlab::rng;
use poisonlab::Result;

#[derive(Parser)]
#[command(
    name = "poisonlab",
    version,
    about = "Poisoning attacks on sparse linear classifiers, outlier-filtering defences, and a seeded experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured experiment and write the report CSV plus a
    /// resolved-config sidecar JSON.
    ///
    /// The config is JSON mirroring the ExperimentConfig fields. External
    /// datasets are never downloaded; point the config at local files.
    /// Spambase: https://archive.ics.uci.edu/dataset/94/spambase
    /// (spambase.data). MNIST IDX files:
    /// https://yann.lecun.com/exdb/mnist/ (t10k or train images + labels).
    Run {
        /// Experiment description (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Report CSV path; the sidecar lands next to it as
        /// `<stem>.config.json`.
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
    },
    /// Trace the single-point attack on 2-D Gaussians: writes the
    /// trajectory CSV (iter,x1,x2,objective) and a summary JSON with the
    /// clean and poisoned boundary parameters.
    DemoFig1 {
        /// Optional demo settings (JSON); defaults reproduce the built-in
        /// 2-D scenario.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trajectory CSV path.
        #[arg(long, default_value = "fig1_trajectory.csv")]
        out: PathBuf,
        /// Boundary/objective summary JSON path.
        #[arg(long, default_value = "fig1_summary.json")]
        summary: PathBuf,
    },
    /// Compare the implicit poisoning gradient against central finite
    /// differences with full retraining on random unregularized instances.
    Gradcheck {
        /// Number of accepted random instances.
        #[arg(long, default_value_t = 20)]
        instances: usize,
    },
    /// Cross-check every outlier scorer against an independent brute-force
    /// reimplementation on random instances.
    OracleCheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => cmd_run(&config, &out),
        Command::DemoFig1 {
            config,
            out,
            summary,
        } => cmd_demo(config.as_deref().map(PathBuf::from), &out, &summary),
        Command::Gradcheck { instances } => cmd_gradcheck(instances),
        Command::OracleCheck => cmd_oracle_check(),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{}", serde_json::json!({ "error": "checks failed" }));
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}

fn cmd_run(config_path: &PathBuf, out: &PathBuf) -> Result<bool> {
    let text = std::fs::read_to_string(config_path)?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)?;
    let report = run_experiment(&cfg)?;
    emit_report(&report, out)?;
    let sidecar = out.with_extension("config.json");
    emit_resolved_config(&cfg, &report.failures, &sidecar)?;
    println!(
        "wrote {} ({} rows) and {}",
        out.display(),
        report.rows.len(),
        sidecar.display()
    );
    if !report.failures.is_empty() {
        println!(
            "{} repetition(s) failed; details in the sidecar failure log",
            report.failures.len()
        );
    }
    // Rows plus failures: still a usable report. No rows at all: nothing
    // was measured, which is a failure.
    Ok(!report.rows.is_empty())
}

fn cmd_demo(config: Option<PathBuf>, out: &PathBuf, summary: &PathBuf) -> Result<bool> {
    let cfg: Fig1Config = match config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => Fig1Config::default(),
    };
    let demo = run_trajectory_demo(&cfg)?;
    emit_trajectory_csv(&demo, out)?;
    emit_trajectory_summary(&demo, summary)?;
    let sidecar = out.with_extension("config.json");
    std::fs::write(&sidecar, serde_json::to_string_pretty(&cfg)?)?;
    let last = demo.rows.last().expect("the trace always has the initial row");
    println!(
        "wrote {} ({} rows), {} and {}",
        out.display(),
        demo.rows.len(),
        summary.display(),
        sidecar.display()
    );
    println!(
        "objective: clean {:.6}, initial {:.6}, final {:.6} (converged: {})",
        demo.clean_objective, demo.rows[0].objective, demo.final_objective, demo.converged
    );
    println!(
        "poisoning point: label {:+.0}, final position ({:.4}, {:.4})",
        demo.poison_label, last.x1, last.x2
    );
    Ok(true)
}

/// Uniform features in [-2, 2], alternating labels: generic positions,
/// dense least-squares weights.
fn gradcheck_instance(seed: u64, n: usize, d: usize) -> (LabeledDataset, LabeledDataset) {
    let mut prng = rng::rng_from_seed(seed);
    let mut make = |rows: usize| {
        let mut feats = Vec::with_capacity(rows * d);
        let mut labels = Vec::with_capacity(rows);
        for i in 0..rows {
            for _ in 0..d {
                feats.push((rng::unit_halfopen(&mut prng) - 0.5) * 4.0);
            }
            labels.push(if i % 2 == 0 { 1.0 } else { -1.0 });
        }
        LabeledDataset::from_flat(rows, d, feats, labels).expect("generated rows are well-formed")
    };
    (make(n), make(20))
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / norm.max(1e-12)
}

fn cmd_gradcheck(instances: usize) -> Result<bool> {
    const TOL: f64 = 1e-2;
    println!("implicit gradient vs. central finite differences (n = 30, d = 5, no l1 penalty)");
    let mut accepted = 0usize;
    let mut all_ok = true;
    let mut worst = 0.0f64;
    let mut seed = 0u64;
    let budget = (instances as u64).saturating_mul(50).max(1000);
    while accepted < instances && seed < budget {
        let s = seed;
        seed += 1;
        let (train, val) = gradcheck_instance(s, 30, 5);
        let poison = choose_initial_points(&train, 1, 0.0, TargetMode::AllPositive)?;
        let data = train.concat(&poison.to_dataset())?;
        let cfg = TrainConfig::with_lambda(0.0);
        let model = train_lasso(&data, &cfg)?;
        // Weights too close to zero sit near an active-set boundary where
        // one-sided kinks make finite differences meaningless; such draws
        // are rejected, not counted.
        if model.w.iter().any(|w| w.abs() < 1e-3) {
            continue;
        }
        accepted += 1;
        let grad = poison_gradient(0, &poison, &model, &data, &val)?;
        let fd = oracles::fd_attack_gradient(
            &train,
            &val,
            &[poison.point(0).to_vec()],
            &[poison.label(0)],
            0,
            1e-4,
            &mut |d| train_lasso(d, &cfg),
        )?;
        let rel = rel_l2(&grad, &fd);
        let ok = rel <= TOL;
        all_ok &= ok;
        worst = worst.max(rel);
        println!(
            "instance {accepted:>3} (seed {s:>4}): relative l2 error {rel:.3e} {}",
            if ok { "ok" } else { "FAIL" }
        );
    }
    if accepted < instances {
        println!("FAIL: only {accepted} of {instances} instances accepted within the draw budget");
        return Ok(false);
    }
    println!(
        "{}: worst relative error {worst:.3e} over {accepted} instances (tolerance {TOL:.1e})",
        if all_ok { "PASS" } else { "FAIL" }
    );
    Ok(all_ok)
}

fn oracle_features(seed: u64, n: usize, d: usize) -> Features {
    let spec = GaussianSpec {
        mean_pos: vec![0.5; d],
        mean_neg: vec![-0.5; d],
        cov_scale: 1.0,
        n_per_class: n / 2 + 1,
        seed,
    };
    let data = gen_gaussian_binary(&spec).expect("synthetic generation cannot fail here");
    Features::from_labeled(&data).subset(&(0..n).collect::<Vec<_>>())
}

struct CheckSummary {
    name: &'static str,
    comparisons: usize,
    worst: f64,
    tol: f64,
}

impl CheckSummary {
    fn ok(&self) -> bool {
        self.worst <= self.tol
    }
    fn print(&self) {
        println!(
            "{}: {} — worst deviation {:.3e} over {} comparisons (tolerance {:.1e})",
            self.name,
            if self.ok() { "PASS" } else { "FAIL" },
            self.worst,
            self.comparisons,
            self.tol
        );
    }
}

fn cmd_oracle_check() -> Result<bool> {
    println!("outlier scorers vs. independent brute-force oracles");
    let mut summaries: Vec<CheckSummary> = Vec::new();

    // k-th-neighbour distance, exact.
    {
        let (mut worst, mut m) = (0.0f64, 0usize);
        for seed in 0..25 {
            let train = oracle_features(seed, 30, 3);
            let cfg = ScorerConfig {
                k: 5,
                ..ScorerConfig::new(ScorerKind::Knn)
            };
            let scorer = fit_scorer(&cfg, &train)?;
            let queries = oracle_features(seed + 1000, 10, 3);
            for i in 0..queries.len() {
                let q = queries.row(i);
                worst = worst.max((scorer.score(q)? - oracles::knn_distance_brute(&train, q, 5, true)).abs());
                m += 1;
            }
            for i in 0..train.len() {
                let q = train.row(i).to_vec();
                worst = worst
                    .max((scorer.score(&q)? - oracles::knn_distance_brute(&train, &q, 5, true)).abs());
                m += 1;
            }
        }
        summaries.push(CheckSummary { name: "knn", comparisons: m, worst, tol: 1e-9 });
    }

    // Sampled variant: replay the per-query subsample from the seed, then
    // brute-force the k-th neighbour inside it.
    {
        let (mut worst, mut m) = (0.0f64, 0usize);
        for seed in 0..25 {
            let train = oracle_features(seed, 40, 3);
            let cfg = ScorerConfig {
                k: 4,
                s: 20,
                seed: seed * 7 + 1,
                ..ScorerConfig::new(ScorerKind::SampledKnn)
            };
            let scorer = fit_scorer(&cfg, &train)?;
            let queries = oracle_features(seed + 2000, 10, 3);
            for i in 0..queries.len() {
                let q = queries.row(i);
                let mut replay = rng::rng_from_seed(rng::mix_seed(cfg.seed, rng::hash_row(q)));
                let idx = rng::sample_without_replacement(&mut replay, train.len(), cfg.s);
                let sample = train.subset(&idx);
                worst = worst
                    .max((scorer.score(q)? - oracles::knn_distance_brute(&sample, q, 4, true)).abs());
                m += 1;
            }
        }
        summaries.push(CheckSummary { name: "sampled_knn", comparisons: m, worst, tol: 1e-9 });
    }

    // Fixed-sample nearest distance: replay the fit-time sample.
    {
        let (mut worst, mut m) = (0.0f64, 0usize);
        for seed in 0..25 {
            let train = oracle_features(seed, 30, 3);
            let cfg = ScorerConfig {
                s: 10,
                seed: seed * 3 + 2,
                ..ScorerConfig::new(ScorerKind::Sp)
            };
            let scorer = fit_scorer(&cfg, &train)?;
            let mut replay = rng::rng_from_seed(cfg.seed);
            let idx = rng::sample_with_replacement(&mut replay, train.len(), cfg.s);
            let sample = train.subset(&idx);
            if let OutlierScorer::Sp { sample: stored } = &scorer {
                assert_eq!(stored, &sample, "fit-time sample failed to replay");
            }
            let queries = oracle_features(seed + 3000, 10, 3);
            for i in 0..queries.len() {
                let q = queries.row(i);
                worst = worst.max((scorer.score(q)? - oracles::min_distance_brute(&sample, q)).abs());
                m += 1;
            }
        }
        summaries.push(CheckSummary { name: "sp", comparisons: m, worst, tol: 1e-9 });
    }

    // Local outlier factor, members and outside queries.
    {
        let (mut worst, mut m) = (0.0f64, 0usize);
        for seed in 0..25 {
            let train = oracle_features(seed, 25, 3);
            let cfg = ScorerConfig {
                k: 5,
                ..ScorerConfig::new(ScorerKind::Lof)
            };
            let scorer = fit_scorer(&cfg, &train)?;
            let queries = oracle_features(seed + 4000, 8, 3);
            for i in 0..queries.len() {
                let q = queries.row(i);
                worst = worst.max((scorer.score(q)? - oracles::lof_brute(&train, q, 5, None)).abs());
                m += 1;
            }
            for i in 0..train.len() {
                let q = train.row(i).to_vec();
                worst =
                    worst.max((scorer.score(&q)? - oracles::lof_brute(&train, &q, 5, Some(i))).abs());
                m += 1;
            }
        }
        summaries.push(CheckSummary { name: "lof", comparisons: m, worst, tol: 1e-9 });
    }

    // One-class SVM: the solver's dual objective vs. an independent
    // projected-gradient ascent on the same QP.
    {
        let (mut worst, mut m) = (0.0f64, 0usize);
        for seed in 0..10 {
            let train = oracle_features(seed, 20, 3);
            for &nu in &[0.1, 0.3, 0.5] {
                let model = poisonlab::outlier::fit_ocsvm_with_nu(&train, nu)?;
                let reference = oracles::ocsvm_dual_objective_pg(&train, nu)?;
                worst = worst.max((model.dual_objective - reference).abs());
                m += 1;
            }
        }
        summaries.push(CheckSummary { name: "ocsvm", comparisons: m, worst, tol: 1e-4 });
    }

    let mut all_ok = true;
    for s in &summaries {
        s.print();
        all_ok &= s.ok();
    }
    println!("{}", if all_ok { "PASS: all scorers match their oracles" } else { "FAIL: at least one scorer diverged from its oracle" });
    Ok(all_ok)
}
