//! Experiment orchestration: replicas in parallel, ordered merge, CSV and JSON output.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentKind, ExperimentSpec};
use super::stats::{compare, Comparison, Estimate, Prediction, SeriesStats, SummaryStats, Tolerance};
use crate::error::{Error, Result};
use crate::lattice::{sample_bernoulli, Lattice};
use crate::martingale::{mdp_estimate, MartingaleObserver, Tilt};
use crate::observables::{
    occupation_time, ssep_occupation_variance, BlockDensityObserver, BondCurrentObserver, FieldObserver,
    LocalFunction, OccupationObserver,
};
use crate::params::{validate_assumption, AssumptionReport};
use crate::rate::{
    field_prediction, finite_dim_rate, forward_path, i_path, minimize_path_rate, optimal_profile, sigma_sq,
    verify_integrals, FbmKernel,
};
use crate::rng::replica_seed;
use crate::simulator::{simulate_tilted_with, simulate_with, SimOptions};
use crate::test_fn::{Bump, RampedBump};

/// Identifier of the source revision this library was built from.
pub const BUILD_ID: &str = env!("WASEP_BUILD_ID");

/// A deterministic check with a reference value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCheck {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl NamedCheck {
    /// Relative error check.
    pub fn relative(name: &str, value: f64, reference: f64, tolerance: f64) -> Self {
        let error = (value - reference).abs() / reference.abs();
        Self {
            name: name.into(),
            value,
            reference,
            error,
            tolerance,
            pass: error <= tolerance,
        }
    }

    /// Absolute error check.
    pub fn absolute(name: &str, value: f64, reference: f64, tolerance: f64) -> Self {
        let error = (value - reference).abs();
        Self {
            name: name.into(),
            value,
            reference,
            error,
            tolerance,
            pass: error <= tolerance,
        }
    }
}

/// Importance-sampled tail estimate; `None` stands for `-inf` (no hits).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpSummary {
    pub threshold: f64,
    pub scaled_log_prob: Option<f64>,
    pub stderr: Option<f64>,
    pub probability: f64,
    pub prob_stderr: f64,
    pub hits: usize,
    pub replicas: usize,
    /// `-finite_dim_rate`, the limiting value of the scaled log-probability.
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: ExperimentKind,
    pub build_id: String,
    pub seed: u64,
    pub replicas: usize,
    pub torus_side: usize,
    pub config: ExperimentSpec,
    pub assumption: AssumptionReport,
    pub summary: SummaryStats,
    pub comparison: Option<Comparison>,
    pub checks: Vec<NamedCheck>,
    pub mdp: Option<MdpSummary>,
}

impl RunReport {
    /// False when any declared comparison or check failed.
    pub fn passed(&self) -> bool {
        self.comparison.as_ref().is_none_or(|c| c.pass) && self.checks.iter().all(|c| c.pass)
    }
}

/// Per-replica series on the grid, in replica order.
#[derive(Debug, Clone, Default)]
pub struct ReplicaTable {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `rows[replica][column][time]`.
    pub rows: Vec<Vec<Vec<f64>>>,
}

impl ReplicaTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push_str(",replica_id\n");
        for (r, cols) in self.rows.iter().enumerate() {
            for (k, t) in self.times.iter().enumerate() {
                let _ = write!(out, "{t}");
                for c in cols {
                    let _ = write!(out, ",{}", c[k]);
                }
                let _ = writeln!(out, ",{r}");
            }
        }
        out
    }

    fn column(&self, j: usize) -> Vec<Vec<f64>> {
        self.rows.iter().map(|cols| cols[j].clone()).collect()
    }
}

pub struct RunOutput {
    pub report: RunReport,
    pub table: ReplicaTable,
    pub files: Vec<PathBuf>,
}

struct Replica {
    headline: f64,
    columns: Vec<Vec<f64>>,
}

fn par_replicas<F>(spec: &ExperimentSpec, f: F) -> Result<Vec<Replica>>
where
    F: Fn(u64) -> Result<Replica> + Sync,
{
    (0..spec.replicas as u64)
        .into_par_iter()
        .map(|i| f(replica_seed(spec.seed, i)))
        .collect()
}

fn bump(spec: &ExperimentSpec) -> Bump {
    Bump::new(spec.params.d, spec.options.bump_radius, spec.options.bump_amplitude)
}

/// Runs the experiment without touching the file system.
pub fn execute(spec: &ExperimentSpec) -> Result<(RunReport, ReplicaTable)> {
    spec.validate()?;
    let params = spec.params;
    let grid = spec.grid();
    let mut table = ReplicaTable {
        times: grid.clone(),
        ..Default::default()
    };
    let mut comparison = None;
    let mut checks = Vec::new();
    let mut mdp = None;
    let mut headline = Vec::new();
    let mut series = Vec::new();

    let mut collect = |reps: Vec<Replica>, names: &[&str], table: &mut ReplicaTable| -> Result<()> {
        headline = reps.iter().map(|r| r.headline).collect();
        table.names = names.iter().map(|s| s.to_string()).collect();
        table.rows = reps.into_iter().map(|r| r.columns).collect();
        for (j, name) in names.iter().enumerate() {
            series.push(SeriesStats::from_rows(name, &table.times, &table.column(j))?);
        }
        Ok(())
    };

    match spec.kind {
        ExperimentKind::Stationarity => {
            let lattice = Lattice::from_params(&params);
            let block: Vec<usize> = (0..spec.options.block.unwrap_or(params.n).min(lattice.num_sites())).collect();
            let opts = SimOptions {
                record_jumps: false,
                check_invariants: true,
                track_weight: false,
            };
            let reps = par_replicas(spec, |s| {
                let mut density = BlockDensityObserver::new(&lattice, &block, grid.clone());
                let mut current = BondCurrentObserver::new(&lattice, 0, 0);
                let start = sample_bernoulli(&params, s);
                simulate_with(&params, start, &mut [&mut density, &mut current], s, &opts)?;
                Ok(Replica {
                    headline: density.time_average(),
                    columns: vec![density.values().to_vec(), vec![current.net() as f64; grid.len()]],
                })
            })?;
            let currents: Vec<f64> = reps.iter().map(|r| r.columns[1][0]).collect();
            collect(reps, &["block_density", "bond_current"], &mut table)?;
            let m = super::stats::Moments::of(&headline);
            comparison = Some(compare(
                &Estimate {
                    times: vec![params.horizon],
                    values: vec![m.mean],
                    stderr: vec![m.stderr],
                },
                &Prediction {
                    times: vec![params.horizon],
                    values: vec![params.rho],
                },
                Tolerance::ZScore(3.0),
            )?);
            if params.alpha == 0.0 && spec.replicas > 1 {
                let c = super::stats::Moments::of(&currents);
                checks.push(NamedCheck::absolute("mean_bond_current", c.mean, 0.0, 3.0 * c.stderr));
            }
        }
        ExperimentKind::OccupationVariance => {
            let f = LocalFunction::occupation();
            let reps = par_replicas(spec, |s| {
                let mut occ = OccupationObserver::new(&params, &f, grid.clone())?;
                let start = sample_bernoulli(&params, s);
                simulate_with(&params, start, &mut [&mut occ], s, &SimOptions {
                    record_jumps: false,
                    check_invariants: false,
                    track_weight: false,
                })?;
                let g = occ.gamma().to_vec();
                Ok(Replica {
                    headline: *g.last().unwrap(),
                    columns: vec![g],
                })
            })?;
            collect(reps, &["gamma"], &mut table)?;
            let var = series[0].variances();
            let scale = params.n as f64 / params.a_n().powi(2);
            let s2 = sigma_sq(params.rho)?;
            let keep: Vec<usize> = (0..grid.len()).filter(|&k| grid[k] > 0.0).collect();
            let pick = |v: &[f64]| keep.iter().map(|&k| v[k]).collect::<Vec<_>>();
            let times = pick(&grid);
            comparison = Some(compare(
                &Estimate {
                    times: times.clone(),
                    values: pick(&var.values),
                    stderr: pick(&var.stderr),
                },
                &Prediction {
                    times: times.clone(),
                    values: times.iter().map(|t| scale * s2 * t.powf(1.5)).collect(),
                },
                Tolerance::Relative(0.15),
            )?);
            if params.alpha == 0.0 && spec.replicas > 1 {
                for (&t, &v) in times.iter().zip(&pick(&var.values)).rev().take(1) {
                    let exact = ssep_occupation_variance(&params, t)?;
                    let se = var.stderr[grid.len() - 1];
                    checks.push(NamedCheck::absolute("variance_vs_exact_finite_n", v, exact, 4.0 * se));
                }
            }
        }
        ExperimentKind::TiltedHydro => {
            let profile = optimal_profile(spec.target_time(), spec.options.target_alpha, params.rho)?;
            let radius = spec.profile_radius();
            let h = profile.tilt(radius)?;
            let phi = profile.initial_perturbation(radius);
            let g = bump(spec);
            let opts = SimOptions {
                record_jumps: false,
                check_invariants: false,
                track_weight: false,
            };
            let reps = par_replicas(spec, |s| {
                let mut field = FieldObserver::new(&params, &g, grid.clone())?;
                simulate_tilted_with(&params, &h, &phi, &mut [&mut field], s, &opts)?;
                let v = field.values().to_vec();
                Ok(Replica {
                    headline: *v.last().unwrap(),
                    columns: vec![v],
                })
            })?;
            collect(reps, &["field"], &mut table)?;
            let predicted = grid
                .iter()
                .map(|&t| field_prediction(&profile, params.rho, &g, t))
                .collect::<Result<Vec<_>>>()?;
            comparison = Some(compare(
                &series[0].means(),
                &Prediction {
                    times: grid.clone(),
                    values: predicted,
                },
                Tolerance::ZScore(3.0),
            )?);
        }
        ExperimentKind::MartingaleCheck => {
            let h = RampedBump::new(bump(spec), spec.options.bump_slope, params.horizon);
            let opts = SimOptions {
                record_jumps: false,
                check_invariants: false,
                track_weight: false,
            };
            let reps = par_replicas(spec, |s| {
                let mut mart = MartingaleObserver::new(&params, &h, grid.clone());
                let start = sample_bernoulli(&params, s);
                simulate_with(&params, start, &mut [&mut mart], s, &opts)?;
                let v: Vec<f64> = mart.values().iter().map(|x| x.exp()).collect();
                Ok(Replica {
                    headline: *v.last().unwrap(),
                    columns: vec![v],
                })
            })?;
            collect(reps, &["martingale"], &mut table)?;
            let means = series[0].means();
            let last = means.times.len() - 1;
            comparison = Some(compare(
                &Estimate {
                    times: vec![means.times[last]],
                    values: vec![means.values[last]],
                    stderr: vec![means.stderr[last]],
                },
                &Prediction {
                    times: vec![means.times[last]],
                    values: vec![1.0],
                },
                Tolerance::ZScore(3.0),
            )?);
        }
        ExperimentKind::MdpEstimate => {
            let t = params.horizon;
            let threshold = spec.options.target_alpha;
            let profile = optimal_profile(t, threshold, params.rho)?;
            let radius = spec.profile_radius();
            let h = profile.tilt(radius)?;
            let phi = profile.initial_perturbation(radius);
            let f = LocalFunction::occupation();
            let event = |path: &crate::simulator::PathRecord| {
                occupation_time(path, &f, &params, &[t])
                    .map(|o| o.gamma[0] >= threshold)
                    .unwrap_or(false)
            };
            let est = mdp_estimate(event, &params, Some(Tilt { h: &h, phi: &phi }), spec.replicas, spec.seed)?;
            let finite = |x: f64| x.is_finite().then_some(x);
            mdp = Some(MdpSummary {
                threshold,
                scaled_log_prob: finite(est.scaled_log_prob),
                stderr: finite(est.stderr),
                probability: est.probability,
                prob_stderr: est.prob_stderr,
                hits: est.hits,
                replicas: est.replicas,
                predicted: -finite_dim_rate(&[threshold], &[t], params.rho)?,
            });
            headline = vec![est.probability];
            table.times = Vec::new();
        }
        ExperimentKind::VerifyRates => {
            checks = rate_checks(spec)?;
            headline = checks.iter().map(|c| c.pass as u8 as f64).collect();
            table.times = Vec::new();
        }
    }

    let mut summary = SummaryStats::new(&headline, series);
    if let Some(m) = &mdp {
        summary.stderr = m.prob_stderr;
        summary.count = m.replicas;
        summary.variance = m.prob_stderr.powi(2) * m.replicas as f64;
    }
    let report = RunReport {
        kind: spec.kind,
        build_id: BUILD_ID.to_string(),
        seed: spec.seed,
        replicas: spec.replicas,
        torus_side: params.side(),
        config: spec.clone(),
        assumption: validate_assumption(&params),
        summary,
        comparison,
        checks,
        mdp,
    };
    Ok((report, table))
}

/// The deterministic rate-theory checks.
pub fn rate_checks(spec: &ExperimentSpec) -> Result<Vec<NamedCheck>> {
    let rho = spec.params.rho;
    let horizon = spec.params.horizon;
    let mut checks = Vec::new();
    let ints = verify_integrals(horizon)?;
    checks.push(NamedCheck::relative(
        "initial_energy_integral",
        ints.initial_energy.quadrature,
        ints.initial_energy.closed_form,
        1e-6,
    ));
    checks.push(NamedCheck::relative(
        "dynamic_energy_integral",
        ints.dynamic_energy.quadrature,
        ints.dynamic_energy.closed_form,
        1e-6,
    ));
    checks.push(NamedCheck::relative("cross_integral", ints.cross.quadrature, ints.cross.closed_form, 1e-6));
    let kernel = FbmKernel::get();
    for t in [0.5 * horizon, horizon] {
        checks.push(NamedCheck::absolute(
            &format!("kernel_square_integral_t{t}"),
            kernel.l2_norm_sq(t)?,
            t.powf(1.5),
            1e-4,
        ));
    }
    let times = &spec.options.times;
    let alphas = &spec.options.alphas;
    let tmax = times.iter().copied().fold(0.0, f64::max);
    if !times.is_empty() && tmax > 0.0 {
        // a uniform grid through every constraint time, when the times are commensurate
        let cells = spec.options.path_grid.max(64);
        let grid: Vec<f64> = (0..=cells).map(|i| tmax * i as f64 / cells as f64).collect();
        let f = finite_dim_rate(alphas, times, rho)?;
        match minimize_path_rate(alphas, times, &grid, rho) {
            Ok(m) => checks.push(NamedCheck::relative("path_minimum_vs_quadratic_form", m, f, 0.02)),
            Err(Error::GridMismatch(msg)) => return Err(Error::InvalidSpec(msg)),
            Err(e) => return Err(e),
        }
        let unit = forward_path(&vec![1.0; cells], &grid)?;
        checks.push(NamedCheck::relative("path_rate_round_trip", i_path(&unit, &grid)?, 0.5 * tmax, 0.02));
    }
    Ok(checks)
}

/// Runs the experiment and writes `<kind>.json` (and `<kind>.csv` for ensembles) to `spec.out`.
pub fn run(spec: &ExperimentSpec) -> Result<RunOutput> {
    let (report, table) = execute(spec)?;
    std::fs::create_dir_all(&spec.out)?;
    let mut files = Vec::new();
    let stem = spec.kind.name();
    if !table.times.is_empty() {
        let csv = spec.out.join(format!("{stem}.csv"));
        std::fs::write(&csv, table.to_csv())?;
        files.push(csv);
    }
    let json = spec.out.join(format!("{stem}.json"));
    std::fs::write(&json, serde_json::to_string_pretty(&report)?)?;
    files.push(json);
    Ok(RunOutput { report, table, files })
}
