//! Benchmark runner: many independent sampler runs on one problem, CSV out.
//!
//! A run is a single exact sample; the interesting output is the proposal
//! count K and the arrival itself. Runs are embarrassingly parallel: per-run
//! seeds are drawn up front from the master stream and each run builds its
//! own generator, so the CSV is byte-identical for a fixed (config, seed)
//! regardless of the parallelism degree. Wallclock lives on the in-memory
//! records only; putting it in the file would break reproducibility.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::measures::TargetProblem;
use crate::problems::{
    default_clutter_data, ising_random_params, make_clutter, make_discrete, make_ising,
    make_regression, regression_dataset,
};
use crate::rng::Rng;
use crate::samplers::{RunRecord, Sampler};
use crate::stats::mean_se;

/// The masses of the finite reference table used when `problem = "discrete"`.
pub const DISCRETE_FIXTURE: [f64; 4] = [1.0, 2.0, 3.0, 4.0];

fn default_dim() -> usize {
    1
}
fn default_n_data() -> usize {
    10
}
fn default_n_spins() -> usize {
    5
}
fn default_runs() -> u64 {
    1000
}
fn default_jobs() -> usize {
    1
}

/// Everything a benchmark invocation needs. Deserializes from the JSON
/// config file; the CLI overlays individual flags on top.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// "discrete", "clutter", "regression" or "ising".
    pub problem: String,
    /// Clutter dimension.
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Regression dataset size N (even).
    #[serde(default = "default_n_data")]
    pub n_data: usize,
    /// Ising spin count n.
    #[serde(default = "default_n_spins")]
    pub n_spins: usize,
    pub sampler: Sampler,
    #[serde(default = "default_runs")]
    pub runs: u64,
    /// Master seed: seeds the dataset draw and the per-run seed stream.
    #[serde(default)]
    pub seed: u64,
    /// Worker threads. Output does not depend on it.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    /// Output path for the CSV; None prints to stdout.
    #[serde(default)]
    pub out: Option<std::path::PathBuf>,
}

impl ExperimentConfig {
    pub fn new(problem: &str, sampler: Sampler) -> Self {
        ExperimentConfig {
            problem: problem.to_string(),
            dim: default_dim(),
            n_data: default_n_data(),
            n_spins: default_n_spins(),
            sampler,
            runs: default_runs(),
            seed: 0,
            jobs: default_jobs(),
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::invalid("runs must be >= 1"));
        }
        if self.jobs == 0 {
            return Err(Error::invalid("jobs must be >= 1"));
        }
        match self.problem.as_str() {
            "discrete" | "clutter" | "regression" | "ising" => Ok(()),
            other => Err(Error::invalid(format!(
                "unknown problem id '{other}' (expected discrete, clutter, regression or ising)"
            ))),
        }
    }
}

/// The problem a config describes, with its dataset drawn from the master
/// seed. The first u64 of the master stream is the dataset seed; per-run
/// seeds continue from the same stream, so dataset and run randomness never
/// share generator state.
pub fn build_problem(config: &ExperimentConfig) -> Result<Box<dyn TargetProblem>> {
    config.validate()?;
    let mut master = Rng::seed_from_u64(config.seed);
    let dataset_seed = master.next_u64();
    problem_with_dataset_seed(config, dataset_seed)
}

fn problem_with_dataset_seed(
    config: &ExperimentConfig,
    dataset_seed: u64,
) -> Result<Box<dyn TargetProblem>> {
    match config.problem.as_str() {
        "discrete" => Ok(Box::new(make_discrete(&DISCRETE_FIXTURE)?)),
        // The clutter observations are the fixed replicated-2 set; only the
        // run seeds vary between draws.
        "clutter" => Ok(Box::new(make_clutter(
            default_clutter_data(config.dim),
            config.dim,
        )?)),
        "regression" => Ok(Box::new(make_regression(regression_dataset(
            config.n_data,
            dataset_seed,
        )?)?)),
        "ising" => {
            let (fields, couplings) = ising_random_params(config.n_spins, dataset_seed);
            Ok(Box::new(make_ising(config.n_spins, fields, couplings)?))
        }
        other => Err(Error::invalid(format!("unknown problem id '{other}'"))),
    }
}

/// All runs of one experiment, already rendered for persistence.
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub csv: String,
    pub mean_k: f64,
    pub se_k: f64,
}

/// Execute `config.runs` independent runs and render the CSV.
///
/// Rows appear in run-index order whatever the completion order. Exactly one
/// summary row trails the data; it stores the mean of `k_proposals` and its
/// standard error in the `k_proposals` and `k_bounds` columns.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut master = Rng::seed_from_u64(config.seed);
    let dataset_seed = master.next_u64();
    let problem = problem_with_dataset_seed(config, dataset_seed)?;
    let run_seeds: Vec<u64> = (0..config.runs).map(|_| master.next_u64()).collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let sampler = config.sampler;
    let records: Result<Vec<RunRecord>> = pool.install(|| {
        run_seeds
            .par_iter()
            .map(|&seed| sampler.first(problem.as_ref(), seed))
            .collect()
    });
    let records = records?;

    let ks: Vec<f64> = records.iter().map(|r| r.k_proposals as f64).collect();
    let (mean_k, se_k) = mean_se(&ks);
    let csv = render_csv(problem.as_ref(), &records, mean_k, se_k);
    Ok(ExperimentOutput {
        records,
        csv,
        mean_k,
        se_k,
    })
}

/// RFC-4180 quoting. Every value here is numeric, so this only matters if a
/// future column carries free text.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render_csv(problem: &dyn TargetProblem, records: &[RunRecord], mean_k: f64, se_k: f64) -> String {
    let dim = problem.space().dim();
    let mut out = String::from("run,seed,k_proposals,k_bounds,log_time");
    for d in 0..dim {
        let _ = write!(out, ",x{d}");
    }
    out.push('\n');
    for (i, rec) in records.iter().enumerate() {
        let _ = write!(
            out,
            "{i},{},{},{},{}",
            rec.seed,
            rec.k_proposals,
            rec.k_bounds,
            csv_field(&format!("{}", rec.arrival.log_time))
        );
        let coords = rec.arrival.location.flatten();
        debug_assert_eq!(coords.len(), dim);
        for c in coords {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
    }
    let _ = write!(out, "summary,,{mean_k},{se_k},");
    for _ in 0..dim {
        out.push(',');
    }
    out.push('\n');
    out
}

/// Mean K per sampler over several dataset draws, the quantity the published
/// comparison table reports. Draw d uses master seed `base_seed + d`.
pub fn mean_k_over_draws(
    config: &ExperimentConfig,
    base_seed: u64,
    draws: u64,
) -> Result<f64> {
    let mut total = 0.0;
    for d in 0..draws {
        let mut cfg = config.clone();
        cfg.seed = base_seed + d;
        total += run_experiment(&cfg)?.mean_k;
    }
    Ok(total / draws as f64)
}
