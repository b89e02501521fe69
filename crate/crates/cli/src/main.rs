//! Command-line front end: draw exact samples, run benchmark sweeps, dump
//! raw race arrivals, and run the statistical verification suite.
//!
//! Exit codes: 0 success, 2 usage (unknown ids, malformed config, bad
//! paths), 3 broken sampler contract (unsound bound or no progress),
//! 4 verification failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use race_core::processes::RaceStream;
use race_core::{
    build_problem, run_experiment, verify_suite, Error, ExperimentConfig, FaultInjection, Rng,
};

/// Seed fallback when neither --seed nor the config file provides one.
const SEED_ENV: &str = "RACE_SAMPLER_SEED";

#[derive(Parser)]
#[command(name = "race", version, about = "Exact sampling via exponential races")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw one exact sample and print the arrival.
    Sample(ConfigFlags),
    /// Run many independent runs and write the benchmark CSV.
    Bench(ConfigFlags),
    /// Dump the first arrivals of the proposal race on a problem.
    RaceDump {
        #[command(flatten)]
        flags: ConfigFlags,
        /// How many arrivals to emit.
        #[arg(long, default_value_t = 10)]
        count: u64,
    },
    /// Run the statistical verification suite (exit 4 on failure).
    Verify {
        #[arg(long)]
        seed: Option<u64>,
        /// Sabotage the fixture's bound to demonstrate failure detection.
        #[arg(long)]
        inject_bound_fault: bool,
    },
}

/// One flag per config field; anything given here overrides the JSON file.
#[derive(Args)]
struct ConfigFlags {
    /// JSON file with the same fields as the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// discrete, clutter, regression or ising.
    #[arg(long)]
    problem: Option<String>,
    /// rej, per, osstar or astar.
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    runs: Option<u64>,
    /// Master seed; seeds the dataset draw and the per-run seed stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Clutter dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Regression dataset size N.
    #[arg(long)]
    n_data: Option<usize>,
    /// Ising spin count n.
    #[arg(long)]
    n_spins: Option<usize>,
    /// Worker threads for bench (output is identical for any value).
    #[arg(long)]
    jobs: Option<usize>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigFlags {
    /// File < environment seed < flags, strongest last.
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut file_value = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str::<serde_json::Value>(&text)
                    .map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))?
            }
            None => serde_json::json!({}),
        };
        let obj = file_value
            .as_object_mut()
            .ok_or_else(|| Error::invalid("config file must hold a JSON object"))?;
        if !obj.contains_key("seed") && self.seed.is_none() {
            if let Ok(env_seed) = std::env::var(SEED_ENV) {
                let parsed: u64 = env_seed
                    .parse()
                    .map_err(|_| Error::invalid(format!("{SEED_ENV} must be a u64")))?;
                obj.insert("seed".into(), parsed.into());
            }
        }
        if let Some(problem) = &self.problem {
            obj.insert("problem".into(), problem.clone().into());
        }
        if let Some(sampler) = &self.sampler {
            obj.insert("sampler".into(), sampler.clone().into());
        }
        match (obj.contains_key("problem"), obj.contains_key("sampler")) {
            (true, true) => {}
            _ => return Err(Error::invalid("need --problem and --sampler (or a config file)")),
        }
        let mut config: ExperimentConfig = serde_json::from_value(file_value)
            .map_err(|e| Error::invalid(format!("config: {e}")))?;
        if let Some(runs) = self.runs {
            config.runs = runs;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(dim) = self.dim {
            config.dim = dim;
        }
        if let Some(n_data) = self.n_data {
            config.n_data = n_data;
        }
        if let Some(n_spins) = self.n_spins {
            config.n_spins = n_spins;
        }
        if let Some(jobs) = self.jobs {
            config.jobs = jobs;
        }
        if let Some(out) = &self.out {
            config.out = Some(out.clone());
        }
        config.validate()?;
        Ok(config)
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn cmd_sample(flags: &ConfigFlags) -> Result<(), Error> {
    let mut config = flags.resolve()?;
    config.runs = 1;
    config.jobs = 1;
    let output = run_experiment(&config)?;
    let rec = &output.records[0];
    println!("problem {}", config.problem);
    println!("sampler {}", config.sampler);
    println!("master_seed {}", config.seed);
    println!("run_seed {}", rec.seed);
    println!("log_time {}", rec.arrival.log_time);
    println!("time {}", rec.arrival.log_time.exp());
    let coords = rec.arrival.location.flatten();
    let rendered: Vec<String> = coords.iter().map(|c| format!("{c}")).collect();
    println!("location {}", rendered.join(" "));
    println!("k_proposals {}", rec.k_proposals);
    println!("k_bounds {}", rec.k_bounds);
    println!("wallclock_secs {}", rec.wallclock_secs);
    Ok(())
}

fn cmd_bench(flags: &ConfigFlags) -> Result<(), Error> {
    let config = flags.resolve()?;
    let started = std::time::Instant::now();
    let output = run_experiment(&config)?;
    let wall: f64 = output.records.iter().map(|r| r.wallclock_secs).sum::<f64>()
        / output.records.len() as f64;
    eprintln!(
        "{} {} runs {}: mean K {:.4} (se {:.4}), mean wallclock {:.2e} s, total {:.2} s",
        config.problem,
        config.sampler,
        config.runs,
        output.mean_k,
        output.se_k,
        wall,
        started.elapsed().as_secs_f64()
    );
    emit(&config.out, &output.csv)
}

fn cmd_race_dump(flags: &ConfigFlags, count: u64) -> Result<(), Error> {
    let config = flags.resolve()?;
    let problem = build_problem(&config)?;
    // Skip the master stream's dataset word the same way run_experiment
    // does, so the dump lines up with the runs of the same seed.
    let mut master = Rng::seed_from_u64(config.seed);
    let _dataset_seed = master.next_u64();
    let mut stream =
        RaceStream::flat(problem.proposal(), problem.root_region(), master)?;
    let mut csv = String::from("index,log_time");
    let dim = problem.space().dim();
    for d in 0..dim {
        csv.push_str(&format!(",x{d}"));
    }
    csv.push('\n');
    for _ in 0..count {
        let arrival = stream.next_arrival()?;
        csv.push_str(&format!("{},{}", arrival.index, arrival.log_time));
        for c in arrival.location.flatten() {
            csv.push_str(&format!(",{c}"));
        }
        csv.push('\n');
    }
    emit(&config.out, &csv)
}

fn cmd_verify(seed: Option<u64>, inject: bool) -> Result<bool, Error> {
    let seed = match seed {
        Some(s) => s,
        None => match std::env::var(SEED_ENV) {
            Ok(v) => v.parse().map_err(|_| Error::invalid(format!("{SEED_ENV} must be a u64")))?,
            Err(_) => 0,
        },
    };
    let fault = if inject { FaultInjection::CorruptedBound } else { FaultInjection::None };
    let summary = verify_suite(seed, fault)?;
    println!("{:<4} {:<42} {:>10} {:>9}  detail", "", "check", "statistic", "p");
    for report in &summary.reports {
        println!(
            "{:<4} {:<42} {:>10.4} {:>9.4}  {}",
            if report.pass { "ok" } else { "FAIL" },
            report.name,
            report.statistic,
            report.p_value,
            report.detail
        );
    }
    let failed = summary.reports.iter().filter(|r| !r.pass).count();
    println!(
        "{} checks, {} failed (seed {seed}{})",
        summary.reports.len(),
        failed,
        if inject { ", bound fault injected" } else { "" }
    );
    Ok(summary.pass)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) | Error::Io(_) => 2,
        Error::ContractViolation(_) | Error::ProgressFailure { .. } => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Sample(flags) => cmd_sample(flags),
        Cmd::Bench(flags) => cmd_bench(flags),
        Cmd::RaceDump { flags, count } => cmd_race_dump(flags, *count),
        Cmd::Verify { seed, inject_bound_fault } => {
            return match cmd_verify(*seed, *inject_bound_fault) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(4),
                Err(err) => {
                    eprintln!("error: {err}");
                    ExitCode::from(exit_code_for(&err))
                }
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
