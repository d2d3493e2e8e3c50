use std::f64::consts::PI;

use proptest::prelude::*;
use wasep_core::rate::*;
use wasep_core::test_fn::{Bump, RampedBump};
use wasep_core::{chi, Error};

fn one_point_closed_form(t: f64, alpha: f64, rho: f64) -> f64 {
    3.0 * PI.sqrt() * alpha * alpha / (8.0 * 2f64.sqrt() * t.powf(1.5) * chi(rho).unwrap())
}

fn unit(time: f64) -> ProfilePair {
    ProfilePair::from_kernels(vec![KernelTerm { weight: 1.0, time }])
}

#[test]
fn heat_kernel_rejects_nonpositive_time() {
    assert!((heat_kernel(1.0, &[0.0]).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
    assert!(matches!(heat_kernel(0.0, &[0.0]), Err(Error::NonPositiveTime(_))));
}

#[test]
fn optimal_profile_cost_matches_closed_form() {
    for &(t, alpha, rho) in &[(1.0, 0.5, 0.5), (0.7, -1.2, 0.3)] {
        let p = optimal_profile(t, alpha, rho).unwrap();
        let q = q_rate(&p, rho).unwrap();
        let exact = one_point_closed_form(t, alpha, rho);
        assert!((q - exact).abs() < 1e-5 * exact, "t={t} alpha={alpha}: {q} vs {exact}");
    }
}

#[test]
fn optimal_profile_meets_constraint() {
    let (t, alpha, rho) = (1.0, 0.5, 0.5);
    let p = optimal_profile(t, alpha, rho).unwrap();
    let c = constraint_integral(&p, rho, t).unwrap();
    assert!((c - alpha).abs() < 1e-4, "{c}");
}

#[test]
fn constraint_of_unit_profile_agrees_with_inner_products() {
    // integrating mu(s, 0) in time equals chi (<phi, k0(T)> + [H, H^T]) for kernel profiles
    let rho = 0.3;
    let p = ProfilePair::from_kernels(vec![
        KernelTerm { weight: 0.8, time: 0.6 },
        KernelTerm { weight: -0.3, time: 1.7 },
    ]);
    for t in [0.4, 1.0, 2.0] {
        let via_mu = constraint_integral(&p, rho, t).unwrap();
        let via_inner = chi(rho).unwrap() * energy_inner(&p, &unit(t)).unwrap();
        assert!((via_mu - via_inner).abs() < 1e-7, "t={t}: {via_mu} vs {via_inner}");
    }
}

#[test]
fn multi_time_minimizer_meets_every_constraint() {
    let (alpha, times, rho) = ([1.0, 1.0], [1.0, 2.0], 0.5);
    let p = minimizer_multi(&alpha, &times, rho).unwrap();
    for (a, t) in alpha.iter().zip(times) {
        let c = constraint_integral(&p, rho, t).unwrap();
        assert!((c - a).abs() < 1e-3, "t={t}: {c}");
    }
    let q = q_rate(&p, rho).unwrap();
    let f = finite_dim_rate(&alpha, &times, rho).unwrap();
    assert!((q - f).abs() < 1e-3 * f, "{q} vs {f}");
}

#[test]
fn perturbations_with_zero_constraints_are_orthogonal_to_the_minimizer() {
    let (alpha, times, rho) = ([0.7, -0.4], [0.8, 1.6], 0.4);
    let best = minimizer_multi(&alpha, &times, rho).unwrap();
    let bumps = [(0.3, 1.1, 0.5), (-0.6, 0.9, 1.2), (1.4, 0.5, 0.2)];
    for (k, &(shift, width, speed)) in bumps.iter().enumerate() {
        // a smooth custom pair with its constraint values projected out
        let raw = ProfilePair::custom(
            move |v| (-(v - shift) * (v - shift) / (2.0 * width * width)).exp(),
            move |r, v| {
                let decay = (1.0 - r / 2.0).max(0.0);
                -speed * (v + shift) * (-(v + shift) * (v + shift)).exp() * decay
            },
            2.0,
            12.0,
            vec![],
            vec![2.0],
        );
        let units: Vec<ProfilePair> = times.iter().map(|&t| unit(t)).collect();
        let mut m = nalgebra::Matrix2::zeros();
        let mut c = nalgebra::Vector2::zeros();
        for i in 0..2 {
            c[i] = constraint_integral(&raw, rho, times[i]).unwrap();
            for j in 0..2 {
                m[(i, j)] = constraint_integral(&units[j], rho, times[i]).unwrap();
            }
        }
        let g = m.lu().solve(&c).unwrap();
        let pert = ProfilePair::linear_combination(&[(1.0, &raw), (-g[0], &units[0]), (-g[1], &units[1])]);
        for &t in &times {
            assert!(constraint_integral(&pert, rho, t).unwrap().abs() < 1e-7);
        }
        let overlap = energy_inner(&pert, &best).unwrap();
        assert!(overlap.abs() < 1e-3, "case {k}: {overlap}");
    }
}

#[test]
fn weak_residual_is_small_for_random_pairs() {
    let cases = [
        (vec![(0.4, 1.0)], 1.0, 1.5, 0.0, 0.5),
        (vec![(1.0, 0.5), (-0.5, 1.2)], 1.0, 2.0, 0.3, 1.0),
        (vec![(-0.7, 2.0)], 0.8, 1.0, -0.2, 1.5),
        (vec![(0.3, 0.3), (0.3, 0.9)], 1.2, 1.0, 0.5, 0.7),
        (vec![(2.0, 1.0)], 1.0, 3.0, 0.1, 1.0),
    ];
    for (k, (terms, amp, radius, center, t)) in cases.into_iter().enumerate() {
        let p = ProfilePair::from_kernels(
            terms.iter().map(|&(weight, time)| KernelTerm { weight, time }).collect(),
        );
        let bump = Bump::centered_at(1, &[center], radius, amp);
        let g = RampedBump::new(bump, -0.3, 2.0);
        let r = weak_solution_residual(&p, 0.5, &g, t).unwrap();
        assert!(r <= 1e-4, "case {k}: residual {r}");
    }
}

#[test]
fn weak_residual_vanishes_for_zero_data() {
    let g = Bump::new(1, 1.0, 1.0);
    assert_eq!(weak_solution_residual(&ProfilePair::zero(), 0.5, &g, 1.0).unwrap(), 0.0);
}

#[test]
fn weak_residual_shrinks_under_refinement() {
    let p = optimal_profile(1.0, 1.0, 0.5).unwrap();
    let g = RampedBump::new(Bump::centered_at(1, &[0.2], 1.2, 1.0), 0.5, 1.0);
    let coarse = weak_solution_residual_with(&p, 0.5, &g, 1.0, 1).unwrap();
    let fine = weak_solution_residual_with(&p, 0.5, &g, 1.0, 2).unwrap();
    let finer = weak_solution_residual_with(&p, 0.5, &g, 1.0, 4).unwrap();
    assert!(fine < coarse && finer < fine, "{coarse} {fine} {finer}");
}

#[test]
fn inner_h1_is_symmetric_and_bilinear() {
    let a = ProfilePair::from_kernels(vec![KernelTerm { weight: 0.7, time: 0.5 }, KernelTerm { weight: -0.2, time: 1.5 }]);
    let b = ProfilePair::from_kernels(vec![KernelTerm { weight: 1.3, time: 1.0 }]);
    let c = ProfilePair::custom(|_| 0.0, |r, v| (1.0 - r) * v * (-v * v).exp(), 1.0, 8.0, vec![], vec![1.0]);
    let ab = inner_h1(&a, &b).unwrap();
    assert!((ab - inner_h1(&b, &a).unwrap()).abs() < 1e-10);
    let (x, y) = (1.7, -0.4);
    let combo = ProfilePair::linear_combination(&[(x, &a), (y, &c)]);
    let lhs = inner_h1(&combo, &b).unwrap();
    let rhs = x * ab + y * inner_h1(&c, &b).unwrap();
    assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
}

#[test]
fn single_constraint_rate_formula() {
    for (t, alpha) in [(0.5, 1.0), (2.0, -1.0)] {
        let f = finite_dim_rate(&[alpha], &[t], 0.5).unwrap();
        assert!((f - one_point_closed_form(t, alpha, 0.5)).abs() < 1e-12);
    }
}

#[test]
fn kernel_square_integral_matches_variance() {
    let k = FbmKernel::get();
    for t in [0.5, 1.0, 2.0] {
        let v = k.l2_norm_sq(t).unwrap();
        assert!((v - t.powf(1.5)).abs() < 1e-4, "t={t}: {v}");
    }
}

fn uniform_grid(horizon: f64, cells: usize) -> Vec<f64> {
    (0..=cells).map(|i| horizon * i as f64 / cells as f64).collect()
}

#[test]
fn sampler_covariance() {
    let grid = [0.0, 0.5, 1.0];
    let sampler = FbmSampler::new(&grid).unwrap();
    let mut rng = wasep_core::rng::aux_rng(2024);
    let n = 10_000;
    let (mut sx, mut sy, mut sxy, mut sxx, mut syy, mut sp2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..n {
        let p = sampler.sample(&mut rng);
        let (x, y) = (p[1], p[2]);
        sx += x;
        sy += y;
        sxy += x * y;
        sxx += x * x;
        syy += y * y;
        sp2 += (x * y) * (x * y);
    }
    let nf = n as f64;
    let cov = sxy / nf - sx * sy / (nf * nf);
    let se = ((sp2 / nf - (sxy / nf).powi(2)) / nf).sqrt();
    assert!((cov - fbm_cov(0.5, 1.0)).abs() < 3.0 * se, "cov {cov} se {se}");
    assert!((sxx / nf - 0.5f64.powf(1.5)).abs() < 0.05);
    assert!((syy / nf - 1.0).abs() < 0.1);
}

#[test]
fn path_rate_round_trip_and_scaling() {
    let grid = uniform_grid(1.0, 256);
    let ones = vec![1.0; 256];
    let gamma = forward_path(&ones, &grid).unwrap();
    let v = i_path(&gamma, &grid).unwrap();
    assert!((v - 0.5).abs() < 0.01, "{v}");
    for c in [2.0, -1.0] {
        let scaled: Vec<f64> = gamma.iter().map(|g| c * g).collect();
        let w = i_path(&scaled, &grid).unwrap();
        assert!((w - c * c * v).abs() < 1e-8 * w.abs());
    }
    assert_eq!(i_path(&vec![0.0; 257], &grid).unwrap(), 0.0);
}

#[test]
fn path_rate_round_trip_for_a_smooth_rate() {
    let grid = uniform_grid(2.0, 128);
    let rate: Vec<f64> = grid.windows(2).map(|w| (2.0 * (w[0] + w[1])).sin()).collect();
    let exact: f64 = 0.5 * rate.iter().map(|r| r * r).sum::<f64>() * (2.0 / 128.0);
    let gamma = forward_path(&rate, &grid).unwrap();
    let v = i_path(&gamma, &grid).unwrap();
    assert!((v - exact).abs() < 0.02 * exact, "{v} vs {exact}");
}

#[test]
fn rough_paths_are_flagged_infinite() {
    let grid = uniform_grid(1.0, 256);
    let step: Vec<f64> = grid.iter().map(|&t| if t > 0.5 { 1.0 } else { 0.0 }).collect();
    let root: Vec<f64> = grid.iter().map(|t| t.sqrt()).collect();
    for gamma in [step, root] {
        let report = i_path_report(&gamma, &grid).unwrap();
        assert!(report.value.is_infinite(), "{report:?}");
    }
    // gamma(t) = t needs a rate of order s^{-1/4}, still square integrable
    assert!(i_path(&grid, &grid).unwrap().is_finite());
}

#[test]
fn constrained_path_minimum_matches_quadratic_form() {
    let grid = uniform_grid(2.0, 256);
    for (alpha, times) in [(vec![1.0], vec![1.0]), (vec![1.0, 1.0], vec![1.0, 2.0])] {
        let m = minimize_path_rate(&alpha, &times, &grid, 0.5).unwrap();
        let f = finite_dim_rate(&alpha, &times, 0.5).unwrap();
        assert!((m - f).abs() < 0.02 * f, "{m} vs {f}");
    }
    assert_eq!(minimize_path_rate(&[0.0], &[1.0], &grid, 0.5).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn finite_dim_rate_ignores_labeling(
        a in prop::collection::vec(-3.0f64..3.0, 3),
        t in prop::collection::btree_set(1u32..400, 3),
        rho in 0.05f64..0.95,
    ) {
        let times: Vec<f64> = t.iter().map(|&x| x as f64 / 100.0).collect();
        let base = finite_dim_rate(&a, &times, rho).unwrap();
        let perm = [2usize, 0, 1];
        let pa: Vec<f64> = perm.iter().map(|&i| a[i]).collect();
        let pt: Vec<f64> = perm.iter().map(|&i| times[i]).collect();
        let other = finite_dim_rate(&pa, &pt, rho).unwrap();
        prop_assert!((base - other).abs() <= 1e-9 * base.abs().max(1.0));
    }

    #[test]
    fn extra_constraints_never_lower_the_rate(
        a in prop::collection::vec(-3.0f64..3.0, 2),
        t in prop::collection::btree_set(1u32..400, 2),
    ) {
        let times: Vec<f64> = t.iter().map(|&x| x as f64 / 100.0).collect();
        let both = finite_dim_rate(&a, &times, 0.5).unwrap();
        for i in 0..2 {
            let one = finite_dim_rate(&a[i..=i], &times[i..=i], 0.5).unwrap();
            prop_assert!(both >= one * (1.0 - 1e-12));
        }
    }

    #[test]
    fn covariance_matrices_factor(t in prop::collection::btree_set(1u32..1000, 1..6)) {
        let times: Vec<f64> = t.iter().map(|&x| x as f64 / 100.0).collect();
        let m = cov_matrix(&times).unwrap();
        prop_assert!((m.entries.clone() - m.entries.transpose()).norm() == 0.0);
    }

    #[test]
    fn sigma_is_symmetric_in_density(rho in 0.0f64..1.0) {
        prop_assert!((sigma_sq(rho).unwrap() - sigma_sq(1.0 - rho).unwrap()).abs() < 1e-15);
    }
}
