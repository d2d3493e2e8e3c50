//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line.
//!
//! Runs without the libtest harness so the verdict lines always reach the
//! console. Pass a substring (e.g. `criterion_6`) to run a subset.

use std::f64::consts::{PI, SQRT_2};
use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;
use wasep_core::experiments::{execute, ExperimentKind, ExperimentOptions, ExperimentSpec};
use wasep_core::lattice::Lattice;
use wasep_core::martingale::{girsanov_weight, initial_log_density, MartingaleObserver};
use wasep_core::observables::{BlockDensityObserver, BondCurrentObserver, Gradient, QIntegralObserver};
use wasep_core::rate::*;
use wasep_core::rng::{aux_rng, replica_seed};
use wasep_core::simulator::{simulate_with, SimOptions};
use wasep_core::test_fn::{Bump, RampedBump};
use wasep_core::{chi, sample_bernoulli, validate_assumption, ScalingParams};

// Pinned tolerances.
const CLOSED_FORM_REL: f64 = 1e-6;
const ENERGY_IDENTITY_ABS: f64 = 1e-10;
const ONE_POINT_REL: f64 = 1e-4;
const MULTI_POINT_REL: f64 = 1e-3;
const KERNEL_NORM_ABS: f64 = 1e-4;
const PATH_REL: f64 = 0.02;
const Z_BOUND: f64 = 3.0;
const OCCUPATION_REL: f64 = 0.15;
const CONSERVATION_EVENTS: u64 = 1_000_000;

// Published six-digit constants. Their last digits are not all correctly
// rounded (sigma^2 is 0.2659615...), hence the 2e-6 allowance.
const QUOTED_INITIAL_ENERGY: f64 = 0.440660;
const QUOTED_DYNAMIC_ENERGY: f64 = 0.623186;
const QUOTED_SIGMA_SQ_HALF: f64 = 0.265963;
const QUOTED_ROUNDING: f64 = 2e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

/// Independent closed forms.
fn initial_energy_exact() -> f64 {
    4.0 * (2.0 - SQRT_2) / (3.0 * PI.sqrt())
}

fn dynamic_energy_exact() -> f64 {
    8.0 * (SQRT_2 - 1.0) / (3.0 * PI.sqrt())
}

fn sigma_sq_exact(rho: f64) -> f64 {
    rho * (1.0 - rho) * 4.0 * SQRT_2 / (3.0 * PI.sqrt())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn criterion_1() -> Outcome {
    let c = verify_integrals(1.0).unwrap();
    let e1 = rel(c.initial_energy.quadrature, initial_energy_exact());
    let e2 = rel(c.dynamic_energy.quadrature, dynamic_energy_exact());
    let quoted = (c.initial_energy.quadrature - QUOTED_INITIAL_ENERGY).abs() <= QUOTED_ROUNDING
        && (c.dynamic_energy.quadrature - QUOTED_DYNAMIC_ENERGY).abs() <= QUOTED_ROUNDING;
    let identity = (initial_energy_exact() + dynamic_energy_exact() - sigma_sq(0.5).unwrap() / chi(0.5).unwrap()).abs();
    let pass = e1 <= CLOSED_FORM_REL && e2 <= CLOSED_FORM_REL && quoted && identity <= ENERGY_IDENTITY_ABS;
    Outcome::new(
        pass,
        format!(
            "initial {:.8} (rel {e1:.1e}), dynamic {:.8} (rel {e2:.1e}), quoted digits {}, identity residual {identity:.1e}",
            c.initial_energy.quadrature,
            c.dynamic_energy.quadrature,
            if quoted { "match" } else { "MISMATCH" }
        ),
    )
}

fn criterion_2() -> Outcome {
    let rho = 0.5;
    let s2 = sigma_sq(rho).unwrap();
    let mut worst: f64 = 0.0;
    for (t, alpha) in [(0.5, 1.0), (1.0, 1.0), (2.0, -1.0)] {
        let q = q_rate(&optimal_profile(t, alpha, rho).unwrap(), rho).unwrap();
        worst = worst.max(rel(q, alpha * alpha / (2.0 * s2 * f64::powf(t, 1.5))));
    }
    let sigma_ok = rel(s2, sigma_sq_exact(rho)) < 1e-12 && (s2 - QUOTED_SIGMA_SQ_HALF).abs() <= QUOTED_ROUNDING;
    let (alpha, times) = ([1.0, 1.0], [1.0, 2.0]);
    let q = q_rate(&minimizer_multi(&alpha, &times, rho).unwrap(), rho).unwrap();
    let f = finite_dim_rate(&alpha, &times, rho).unwrap();
    let multi = rel(q, f);
    Outcome::new(
        worst <= ONE_POINT_REL && multi <= MULTI_POINT_REL && sigma_ok,
        format!("one-point worst rel {worst:.1e}, two-point Q {q:.6} vs rate {f:.6} (rel {multi:.1e}), sigma^2 {s2:.7}"),
    )
}

fn criterion_3() -> Outcome {
    let k = FbmKernel::get();
    let kernel_err = [0.5, 1.0, 2.0]
        .iter()
        .map(|&t| (k.l2_norm_sq(t).unwrap() - f64::powf(t, 1.5)).abs())
        .fold(0.0, f64::max);

    let sampler = FbmSampler::new(&[0.0, 0.5, 1.0]).unwrap();
    let mut rng = aux_rng(31_415);
    let products: Vec<f64> = (0..10_000)
        .map(|_| {
            let p = sampler.sample(&mut rng);
            p[1] * p[2]
        })
        .collect();
    let (cov, se) = mean_se(&products);
    // fBm with Hurst 3/4: (0.5^1.5 + 1 - 0.5^1.5) / 2
    let cov_target = 0.5;
    let cov_ok = (cov - cov_target).abs() <= Z_BOUND * se && (fbm_cov(0.5, 1.0) - cov_target).abs() < 1e-15;

    let grid: Vec<f64> = (0..=256).map(|i| i as f64 / 256.0).collect();
    let round_trip = i_path(&forward_path(&vec![1.0; 256], &grid).unwrap(), &grid).unwrap();
    let rt_err = rel(round_trip, 0.5);

    let grid2: Vec<f64> = (0..=256).map(|i| 2.0 * i as f64 / 256.0).collect();
    let mut min_err: f64 = 0.0;
    for (alpha, times) in [(vec![1.0], vec![1.0]), (vec![1.0, 1.0], vec![1.0, 2.0])] {
        let m = minimize_path_rate(&alpha, &times, &grid2, 0.5).unwrap();
        min_err = min_err.max(rel(m, finite_dim_rate(&alpha, &times, 0.5).unwrap()));
    }
    Outcome::new(
        kernel_err <= KERNEL_NORM_ABS && cov_ok && rt_err <= PATH_REL && min_err <= PATH_REL,
        format!(
            "kernel L2 err {kernel_err:.1e}, cov(0.5,1) {cov:.4} +- {se:.4}, round trip {round_trip:.5}, constrained minimum rel {min_err:.1e}"
        ),
    )
}

fn spec(params: ScalingParams, kind: ExperimentKind, replicas: usize, seed: u64, options: ExperimentOptions) -> ExperimentSpec {
    ExperimentSpec {
        params,
        kind,
        replicas,
        seed,
        out: std::env::temp_dir(),
        options,
    }
}

fn criterion_4() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;

    // long single run with the invariant asserted after every jump
    let long = ScalingParams::new(32, 1, 1.0, 1.0, 0.3, 0.75, 40.0, 4).unwrap();
    let opts = SimOptions {
        record_jumps: false,
        check_invariants: true,
        track_weight: false,
    };
    let start = sample_bernoulli(&long, 77);
    let count = start.particle_count();
    let path = simulate_with(&long, start, &mut [], 77, &opts).unwrap();
    let conserved = path.final_config.particle_count() == count && path.jump_count >= CONSERVATION_EVENTS;
    pass &= conserved;
    lines.push(format!("{} jumps conserved", path.jump_count));

    for rho in [0.3, 0.5] {
        for alpha in [0.0, 1.0] {
            let params = ScalingParams::new(32, 1, alpha, 1.0, rho, 0.75, 1.0, 4).unwrap();
            let options = ExperimentOptions {
                grid_points: 21,
                ..Default::default()
            };
            let s = spec(params, ExperimentKind::Stationarity, 400, 4_000 + (10.0 * rho) as u64, options);
            let (report, _) = execute(&s).unwrap();
            let c = report.comparison.as_ref().unwrap();
            pass &= report.passed();
            let current = report
                .checks
                .iter()
                .find(|c| c.name == "mean_bond_current")
                .map(|c| format!(", current {:.2} (bound {:.2})", c.value, c.tolerance))
                .unwrap_or_default();
            lines.push(format!("rho {rho} alpha {alpha}: z {:.2}{current}", c.z[0]));
        }
    }

    // the bond-current check has to be present at alpha = 0
    let params = ScalingParams::new(32, 1, 0.0, 1.0, 0.5, 0.75, 1.0, 4).unwrap();
    let block_sites: Vec<usize> = (0..32).collect();
    let lattice = Lattice::from_params(&params);
    let currents: Vec<f64> = (0..400u64)
        .into_par_iter()
        .map(|i| {
            let s = replica_seed(99, i);
            let mut current = BondCurrentObserver::new(&lattice, 17, 0);
            let mut density = BlockDensityObserver::new(&lattice, &block_sites, vec![0.5, 1.0]);
            simulate_with(&params, sample_bernoulli(&params, s), &mut [&mut current, &mut density], s, &opts).unwrap();
            current.net() as f64
        })
        .collect();
    let (m, se) = mean_se(&currents);
    pass &= m.abs() <= Z_BOUND * se;
    lines.push(format!("independent bond current {m:.3} +- {se:.3}"));
    Outcome::new(pass, lines.join("; "))
}

fn criterion_5() -> Outcome {
    let params = ScalingParams::new(32, 1, 1.0, 1.0, 0.3, 0.6, 1.0, 3).unwrap();
    let h = RampedBump::new(Bump::new(1, 1.0, 1.0), 1.0, params.horizon);
    let phi = Bump::centered_at(1, &[0.25], 0.75, 1.0);
    let replicas = 10_000u64;
    let opts = SimOptions {
        record_jumps: false,
        check_invariants: false,
        track_weight: false,
    };
    let weights: Vec<(f64, f64)> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let s = replica_seed(5_555, i);
            let mut mart = MartingaleObserver::new(&params, &h, vec![params.horizon]);
            let path = simulate_with(&params, sample_bernoulli(&params, s), &mut [&mut mart], s, &opts).unwrap();
            let log_m = mart.values()[0];
            let log_init = initial_log_density(&path.initial, &phi, &params).unwrap();
            (log_m.exp(), (log_m + log_init).exp())
        })
        .collect();
    let (m1, se1) = mean_se(&weights.iter().map(|w| w.0).collect::<Vec<_>>());
    let (m2, se2) = mean_se(&weights.iter().map(|w| w.1).collect::<Vec<_>>());

    // replaying a recorded path must give the streamed value
    let s = replica_seed(5_555, 0);
    let path = simulate_with(&params, sample_bernoulli(&params, s), &mut [], s, &SimOptions::default()).unwrap();
    let replay = girsanov_weight(&path, &h, &phi, &params).unwrap().exp();
    let replay_ok = (replay - weights[0].1).abs() <= 1e-9 * replay;

    let pass = (m1 - 1.0).abs() <= Z_BOUND * se1 && (m2 - 1.0).abs() <= Z_BOUND * se2 && replay_ok;
    Outcome::new(
        pass,
        format!("E[M_T] {m1:.4} +- {se1:.4}; E[Girsanov] {m2:.4} +- {se2:.4}; replay {}", if replay_ok { "agrees" } else { "DIFFERS" }),
    )
}

fn criterion_6() -> Outcome {
    // a_n = n^{1/2}: the field normalization coincides with the CLT scaling
    let params = ScalingParams::new(64, 1, 0.0, 1.0, 0.5, 0.5, 1.0, 4).unwrap();
    let options = ExperimentOptions {
        grid_points: 3,
        ..Default::default()
    };
    let s = spec(params, ExperimentKind::OccupationVariance, 10_000, 6_006, options);
    let (report, _) = execute(&s).unwrap();
    let c = report.comparison.as_ref().unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for k in 0..c.times.len() {
        let t = c.times[k];
        let ratio = c.simulated[k] / f64::powf(t, 1.5);
        let err = rel(ratio, QUOTED_SIGMA_SQ_HALF);
        pass &= err <= OCCUPATION_REL;
        let exact = wasep_core::observables::ssep_occupation_variance(&params, t).unwrap() / f64::powf(t, 1.5);
        parts.push(format!("t {t}: Var/t^1.5 {ratio:.4} (rel {err:.3}, exact finite-n {exact:.4})"));
    }
    pass &= c.times.len() == 2;
    Outcome::new(pass, parts.join("; "))
}

fn criterion_7() -> Outcome {
    let params = ScalingParams::new(64, 1, 1.0, 2.0, 0.5, 0.6, 1.0, 10).unwrap();
    let options = ExperimentOptions {
        grid_points: 3,
        target_alpha: 0.5,
        target_time: Some(1.0),
        profile_radius: Some(4.5),
        ..Default::default()
    };
    let s = spec(params, ExperimentKind::TiltedHydro, 4_000, 7_007, options);
    let (report, _) = execute(&s).unwrap();
    let c = report.comparison.as_ref().unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for k in 0..c.times.len() {
        let scored = c.times[k] > 0.0;
        if scored {
            pass &= c.z[k].abs() <= Z_BOUND;
        }
        parts.push(format!(
            "t {}: {:.4} vs {:.4} (z {:.2}{})",
            c.times[k],
            c.simulated[k],
            c.predicted[k],
            c.z[k],
            if scored { "" } else { ", not scored" }
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

fn q_sup_mean(n: usize, replicas: u64, seed: u64) -> (f64, f64) {
    let params = ScalingParams::new(n, 1, 1.0, 1.0, 0.3, 0.75, 1.0, 4).unwrap();
    assert!(validate_assumption(&params).all_pass());
    let h = Bump::new(1, 1.0, 1.0);
    let grid: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
    let opts = SimOptions {
        record_jumps: false,
        check_invariants: false,
        track_weight: false,
    };
    let sups: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let s = replica_seed(seed, i);
            let mut q = QIntegralObserver::new(&params, &h, Gradient::Continuous, grid.clone()).unwrap();
            simulate_with(&params, sample_bernoulli(&params, s), &mut [&mut q], s, &opts).unwrap();
            q.sup_abs()
        })
        .collect();
    mean_se(&sups)
}

fn criterion_8() -> Outcome {
    let (coarse, se_c) = q_sup_mean(32, 1_000, 8_032);
    let (fine, se_f) = q_sup_mean(64, 1_000, 8_064);
    Outcome::new(
        fine < coarse,
        format!("n=32: {coarse:.4} +- {se_c:.4}; n=64: {fine:.4} +- {se_f:.4}"),
    )
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 8] = [
        ("criterion_1", "closed-form energy integrals", criterion_1),
        ("criterion_2", "variational consistency", criterion_2),
        ("criterion_3", "fractional Brownian machinery", criterion_3),
        ("criterion_4", "simulator conservation and stationarity", criterion_4),
        ("criterion_5", "exponential martingale and Girsanov weight", criterion_5),
        ("criterion_6", "occupation-time variance", criterion_6),
        ("criterion_7", "tilted hydrodynamics", criterion_7),
        ("criterion_8", "replacement term shrinks with n", criterion_8),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, f) in criteria {
        if !filters.is_empty() && !filters.iter().any(|p| id.contains(p.as_str())) {
            continue;
        }
        ran += 1;
        let clock = Instant::now();
        let out = f();
        if !out.pass {
            failed += 1;
        }
        println!(
            "{id} {name}: {} [{:.1}s] {}",
            if out.pass { "PASS" } else { "FAIL" },
            clock.elapsed().as_secs_f64(),
            out.detail
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
