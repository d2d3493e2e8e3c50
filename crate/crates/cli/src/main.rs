use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use wasep_core::experiments::{run, ExperimentKind, ExperimentSpec, RunReport, BUILD_ID};
use wasep_core::rate::{
    finite_dim_rate, inner_h1, l2_inner, minimizer_multi, q0, qdyn, verify_integrals, FbmSampler, IntegralChecks,
};
use wasep_core::rng::aux_rng;
use wasep_core::simulator::{simulate_with, write_jump_log, SimOptions};
use wasep_core::{sample_bernoulli, validate_assumption, Error, ScalingParams};

#[derive(Parser)]
#[command(name = "wasep", version, about = "Weakly asymmetric exclusion: simulation and moderate-deviation numerics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Number of replicas (overrides the config)
    #[arg(long)]
    replicas: Option<usize>,
    /// Output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the ensemble named by the config's `kind` (default: stationarity)
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also simulate replica 0 with jump recording and write its jump log here
        #[arg(long)]
        jump_log: Option<PathBuf>,
    },
    /// Finite-dimensional rate, minimizer norms and the closed-form integral checks
    Rate {
        #[command(flatten)]
        common: Common,
        /// Constraint times, comma separated
        #[arg(long, value_delimiter = ',', default_value = "1")]
        times: Vec<f64>,
        /// Constraint values, comma separated
        #[arg(long, value_delimiter = ',', default_value = "1")]
        alpha: Vec<f64>,
        /// Density (ignored when a config is given)
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
    },
    /// Sample fractional Brownian motion (Hurst 3/4) paths
    Fbm {
        #[command(flatten)]
        common: Common,
        /// Grid points on [0, T], endpoints included
        #[arg(long, default_value_t = 11)]
        grid_points: usize,
        /// Time horizon
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
    },
    /// Deterministic checks of the closed forms and the fBm machinery
    VerifyRates {
        #[command(flatten)]
        common: Common,
    },
    /// Importance-sampled occupation-time tail probability
    MdpEstimate {
        #[command(flatten)]
        common: Common,
    },
    /// Occupation-time variance against the fractional Brownian limit
    Occupation {
        #[command(flatten)]
        common: Common,
    },
}

const DEFAULT_CONFIG: &str = "n = 32\nalpha = 0.0\nbeta = 1.0\nrho = 0.5\ntheta = 0.75\nT = 1.0\nL_macro = 4\n";

fn load(common: &Common, kind: Option<ExperimentKind>, force: bool) -> Result<ExperimentSpec, Error> {
    let mut spec = match &common.config {
        Some(path) => ExperimentSpec::from_file(path, kind)?,
        None => ExperimentSpec::from_toml_str(DEFAULT_CONFIG, kind.or(Some(ExperimentKind::Stationarity)))?,
    };
    if force {
        if let Some(k) = kind {
            spec.kind = k;
        }
    }
    if let Some(s) = common.seed {
        spec.seed = s;
    }
    if let Some(r) = common.replicas {
        spec.replicas = r;
    }
    if let Some(o) = &common.out {
        spec.out = o.clone();
    }
    spec.validate()?;
    Ok(spec)
}

fn set_workers(common: &Common) -> Result<(), Error> {
    if let Some(w) = common.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global()
            .map_err(|e| Error::InvalidSpec(format!("worker pool: {e}")))?;
    }
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value)?)?;
    Ok(path)
}

fn report_outcome(report: &RunReport, files: &[PathBuf]) -> ExitCode {
    for f in files {
        println!("wrote {}", f.display());
    }
    if let Some(c) = &report.comparison {
        for k in 0..c.times.len() {
            println!(
                "t={:<8} simulated={:<14.6e} predicted={:<14.6e} z={:<8.3} rel={:.4}",
                c.times[k], c.simulated[k], c.predicted[k], c.z[k], c.relative_error[k]
            );
        }
    }
    for c in &report.checks {
        println!(
            "{:<36} value={:<14.8e} reference={:<14.8e} error={:.3e} tol={:.1e} {}",
            c.name,
            c.value,
            c.reference,
            c.error,
            c.tolerance,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    if let Some(m) = &report.mdp {
        println!(
            "P(gamma(T) >= {}) = {:.4e} +- {:.1e} ({} hits / {}); scaled log-prob {:?}, limit {:.4}",
            m.threshold, m.probability, m.prob_stderr, m.hits, m.replicas, m.scaled_log_prob, m.predicted
        );
    }
    if report.passed() {
        println!("verdict: pass");
        ExitCode::SUCCESS
    } else {
        println!("verdict: FAIL");
        ExitCode::from(2)
    }
}

fn run_experiment(spec: &ExperimentSpec) -> Result<ExitCode, Error> {
    let out = run(spec)?;
    Ok(report_outcome(&out.report, &out.files))
}

#[derive(Serialize)]
struct MinimizerNorms {
    phi_l2_sq: f64,
    h1_sq: f64,
    q0: f64,
    qdyn: f64,
    total: f64,
    coefficients: Vec<f64>,
}

#[derive(Serialize)]
struct RateOutput {
    times: Vec<f64>,
    alpha: Vec<f64>,
    rho: f64,
    rate: f64,
    minimizer_norms: MinimizerNorms,
    integral_checks: IntegralChecks,
    build_id: &'static str,
}

fn rate_command(common: &Common, times: Vec<f64>, alpha: Vec<f64>, rho: f64) -> Result<ExitCode, Error> {
    let (rho, horizon) = match &common.config {
        Some(_) => {
            let spec = load(common, Some(ExperimentKind::VerifyRates), true)?;
            (spec.params.rho, spec.params.horizon)
        }
        None => (rho, times.iter().copied().fold(0.0, f64::max)),
    };
    let rate = finite_dim_rate(&alpha, &times, rho)?;
    let p = minimizer_multi(&alpha, &times, rho)?;
    let (a, b) = (q0(&p, rho)?, qdyn(&p, rho)?);
    let output = RateOutput {
        rate,
        minimizer_norms: MinimizerNorms {
            phi_l2_sq: l2_inner(&p, &p)?,
            h1_sq: inner_h1(&p, &p)?,
            q0: a,
            qdyn: b,
            total: a + b,
            coefficients: p.meta.coefficients.clone(),
        },
        integral_checks: verify_integrals(horizon)?,
        times,
        alpha,
        rho,
        build_id: BUILD_ID,
    };
    println!("{}", serde_json::to_string_pretty(&output)?);
    if let Some(dir) = &common.out {
        write_json(dir, "rate.json", &output)?;
    }
    let consistent = ((a + b) - rate).abs() <= 1e-3 * rate.abs().max(1e-12);
    Ok(if consistent { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

#[derive(Serialize)]
struct FbmOutput {
    times: Vec<f64>,
    empirical_variance: Vec<f64>,
    predicted_variance: Vec<f64>,
    replicas: usize,
    seed: u64,
    cell: f64,
    build_id: &'static str,
}

fn fbm_command(common: &Common, grid_points: usize, horizon: f64) -> Result<ExitCode, Error> {
    if grid_points < 2 || !(horizon > 0.0) {
        return Err(Error::InvalidSpec("need at least 2 grid points and a positive horizon".into()));
    }
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| horizon * i as f64 / (grid_points - 1) as f64)
        .collect();
    let sampler = FbmSampler::new(&grid)?;
    let replicas = common.replicas.unwrap_or(1000);
    let seed = common.seed.unwrap_or(0);
    let mut rng = aux_rng(seed);
    let paths: Vec<Vec<f64>> = (0..replicas).map(|_| sampler.sample(&mut rng)).collect();
    let empirical_variance = (0..grid.len())
        .map(|k| paths.iter().map(|p| p[k] * p[k]).sum::<f64>() / replicas as f64)
        .collect();
    let output = FbmOutput {
        predicted_variance: grid.iter().map(|t| t.powf(1.5)).collect(),
        times: grid.clone(),
        empirical_variance,
        replicas,
        seed,
        cell: sampler.cell(),
        build_id: BUILD_ID,
    };
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    let mut csv = String::from("time,value,replica_id\n");
    for (r, p) in paths.iter().enumerate() {
        for (t, v) in grid.iter().zip(p) {
            csv.push_str(&format!("{t},{v},{r}\n"));
        }
    }
    std::fs::write(dir.join("fbm.csv"), csv)?;
    let json = write_json(&dir, "fbm.json", &output)?;
    println!("wrote {}", dir.join("fbm.csv").display());
    println!("wrote {}", json.display());
    Ok(ExitCode::SUCCESS)
}

fn simulate_command(common: &Common, jump_log: Option<&Path>) -> Result<ExitCode, Error> {
    let spec = load(common, Some(ExperimentKind::Stationarity), false)?;
    set_workers(common)?;
    if let Some(path) = jump_log {
        write_single_path(&spec.params, spec.seed, path)?;
    }
    run_experiment(&spec)
}

fn write_single_path(params: &ScalingParams, seed: u64, path: &Path) -> Result<(), Error> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let s = wasep_core::rng::replica_seed(seed, 0);
    let record = simulate_with(params, sample_bernoulli(params, s), &mut [], s, &SimOptions::default())?;
    write_jump_log(&record, BufWriter::new(File::create(path)?))?;
    println!("wrote {} ({} jumps)", path.display(), record.jumps.len());
    let report = validate_assumption(params);
    if !report.all_pass() {
        println!("note: exponents outside the admissibility window: {:?}", report.failures());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common, jump_log } => simulate_command(common, jump_log.as_deref()),
        Command::Rate {
            common,
            times,
            alpha,
            rho,
        } => rate_command(common, times.clone(), alpha.clone(), *rho),
        Command::Fbm {
            common,
            grid_points,
            horizon,
        } => fbm_command(common, *grid_points, *horizon),
        Command::VerifyRates { common } => load(common, Some(ExperimentKind::VerifyRates), true)
            .and_then(|s| set_workers(common).and_then(|_| run_experiment(&s))),
        Command::MdpEstimate { common } => load(common, Some(ExperimentKind::MdpEstimate), true)
            .and_then(|s| set_workers(common).and_then(|_| run_experiment(&s))),
        Command::Occupation { common } => load(common, Some(ExperimentKind::OccupationVariance), true)
            .and_then(|s| set_workers(common).and_then(|_| run_experiment(&s))),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
