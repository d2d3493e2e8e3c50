//! Fractional Brownian motion with Hurst index 3/4: covariance, Volterra
//! kernel, a sampler, the sample-path rate and the finite-dimensional rate.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::chi;
use crate::quadrature::{composite_gl, integrate, Tol};
use crate::rng::aux_rng;

/// Relative residual above which a path is declared outside the kernel's range.
pub const I_PATH_RESIDUAL_THRESHOLD: f64 = 1e-5;

const KERNEL_TOL: Tol = Tol::new(1e-14, 1e-12);

/// Variance constant of the occupation-time limit, `4 sqrt(2) chi / (3 sqrt(pi))`.
pub fn sigma_sq(rho: f64) -> Result<f64> {
    Ok(4.0 * 2f64.sqrt() * chi(rho)? / (3.0 * PI.sqrt()))
}

/// Covariance `(t^{3/2} + s^{3/2} - |t - s|^{3/2}) / 2`.
pub fn fbm_cov(s: f64, t: f64) -> f64 {
    0.5 * (t.powf(1.5) + s.powf(1.5) - (t - s).abs().powf(1.5))
}

fn assemble(times: &[f64]) -> DMatrix<f64> {
    let k = times.len();
    DMatrix::from_fn(k, k, |i, j| fbm_cov(times[i], times[j]))
}

/// Covariance matrix at strictly increasing positive times, with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    pub times: Vec<f64>,
    pub entries: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl CovMatrix {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.chol.solve(&DVector::from_column_slice(rhs)).as_slice().to_vec()
    }

    pub fn quadratic_inverse(&self, alpha: &[f64]) -> f64 {
        let y = self.solve(alpha);
        alpha.iter().zip(&y).map(|(a, b)| a * b).sum()
    }
}

pub fn cov_matrix(times: &[f64]) -> Result<CovMatrix> {
    if times.is_empty() || times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NonIncreasingTimes(times.to_vec()));
    }
    let entries = assemble(times);
    let chol = entries
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("covariance at times {times:?}")))?;
    Ok(CovMatrix {
        times: times.to_vec(),
        entries,
        chol,
    })
}

/// Solves `A y = rhs` for times in any order; repeated or nonpositive times are singular.
pub fn solve_cov(times: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    if times.len() != rhs.len() {
        return Err(Error::InvalidParams("times and right-hand side differ in length".into()));
    }
    if times.iter().any(|&t| t <= 0.0) {
        return Err(Error::Singular(format!("nonpositive time in {times:?}")));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Singular(format!("repeated time in {times:?}")));
    }
    let chol = assemble(times)
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("covariance at times {times:?}")))?;
    Ok(chol.solve(&DVector::from_column_slice(rhs)).as_slice().to_vec())
}

/// `alpha^T A^{-1} alpha / (2 sigma^2)`.
pub fn finite_dim_rate(alpha: &[f64], times: &[f64], rho: f64) -> Result<f64> {
    let s2 = sigma_sq(rho)?;
    if s2 == 0.0 {
        return Err(Error::DensityOutOfRange(rho));
    }
    let y = solve_cov(times, alpha)?;
    let q: f64 = alpha.iter().zip(&y).map(|(a, b)| a * b).sum();
    Ok(q / (2.0 * s2))
}

/// Normalization of the Volterra kernel.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FbmKernel {
    /// `int_0^1 (1 - x)^{-1/2} x^{-3/4} dx`.
    pub beta_integral: f64,
    pub c_k: f64,
}

impl FbmKernel {
    pub fn get() -> &'static FbmKernel {
        static KERNEL: OnceLock<FbmKernel> = OnceLock::new();
        KERNEL.get_or_init(|| {
            // x = y^4 near 0 and 1 - x = z^2 near 1 remove both endpoint singularities
            let left = integrate(
                |y: f64| 4.0 / (1.0 - y.powi(4)).sqrt(),
                0.0,
                0.5f64.powf(0.25),
                KERNEL_TOL,
            );
            let right = integrate(
                |z: f64| 2.0 * (1.0 - z * z).powf(-0.75),
                0.0,
                0.5f64.sqrt(),
                KERNEL_TOL,
            );
            let beta_integral = left.expect("smooth integrand") + right.expect("smooth integrand");
            FbmKernel {
                beta_integral,
                c_k: (3.0 / (8.0 * beta_integral)).sqrt(),
            }
        })
    }

    /// `c_K s^{-1/4} int_s^t (u - s)^{-3/4} u^{1/4} du`, for `0 < s < t`.
    pub fn eval(&self, t: f64, s: f64) -> Result<f64> {
        if !(s > 0.0 && s < t) {
            return Err(Error::KernelDomain { s, t });
        }
        // u = s + w^4
        let top = (t - s).powf(0.25);
        let inner = integrate(|w: f64| 4.0 * (s + w.powi(4)).powf(0.25), 0.0, top, KERNEL_TOL)?;
        Ok(self.c_k * s.powf(-0.25) * inner)
    }

    /// `int_a^b K(t, s) ds` for `0 <= a < b <= t`, smoothing the endpoint singularities.
    pub fn cell_integral(&self, t: f64, a: f64, b: f64) -> Result<f64> {
        const ORDER: usize = 10;
        let k = |s: f64| self.eval(t, s).unwrap_or(0.0);
        if a == 0.0 && b >= t {
            let m = 0.5 * t;
            return Ok(self.cell_integral(t, 0.0, m)? + self.cell_integral(t, m, t)?);
        }
        let v = if a == 0.0 {
            // s = b y^4
            composite_gl(|y| 4.0 * b * y.powi(3) * k(b * y.powi(4)), 0.0, 1.0, 2, ORDER)
        } else if b >= t {
            // s = t - (t - a) y^4
            let w = t - a;
            composite_gl(|y| 4.0 * w * y.powi(3) * k(t - w * y.powi(4)), 0.0, 1.0, 2, ORDER)
        } else {
            composite_gl(k, a, b, 1, ORDER)
        };
        Ok(v)
    }

    /// `int_0^t K(t, s)^2 ds`, which should equal `t^{3/2}`.
    pub fn l2_norm_sq(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Err(Error::NonPositiveTime(t));
        }
        // s = t (1 - cos(pi theta)) / 2 tames both ends
        integrate(
            |th: f64| {
                let s = 0.5 * t * (1.0 - (PI * th).cos());
                if s <= 0.0 || s >= t {
                    return 0.0;
                }
                let k = self.eval(t, s).unwrap_or(0.0);
                k * k * 0.5 * t * PI * (PI * th).sin()
            },
            0.0,
            1.0,
            Tol::new(1e-12, 1e-10),
        )
    }
}

pub fn fbm_kernel(t: f64, s: f64) -> Result<f64> {
    FbmKernel::get().eval(t, s)
}

fn check_grid(grid: &[f64], min: usize) -> Result<f64> {
    if grid.len() < min || grid[0] != 0.0 {
        return Err(Error::NonUniformGrid { min });
    }
    let dt = grid[1] - grid[0];
    let uniform = dt > 0.0
        && grid
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.max(grid[grid.len() - 1]));
    if !uniform {
        return Err(Error::NonUniformGrid { min });
    }
    Ok(dt)
}

/// Midpoint discretization of `int_0^t K(t, s) dB_s` on a fine cell grid.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    grid: Vec<f64>,
    cell: f64,
    /// `weights[i][j] = K(grid[i], midpoint_j) sqrt(cell)` for cells below `grid[i]`.
    weights: Vec<Vec<f64>>,
}

impl FbmSampler {
    /// Minimum number of fine cells over the whole horizon.
    pub const MIN_CELLS: usize = 4096;

    pub fn new(grid: &[f64]) -> Result<Self> {
        if grid.len() < 2 || grid[0] < 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonIncreasingTimes(grid.to_vec()));
        }
        let horizon = grid[grid.len() - 1];
        let cell = horizon / Self::MIN_CELLS as f64;
        let kernel = FbmKernel::get();
        let weights = grid
            .iter()
            .map(|&t| {
                let cells = (t / cell).round() as usize;
                let h = if cells == 0 { 0.0 } else { t / cells as f64 };
                (0..cells)
                    .map(|j| kernel.eval(t, (j as f64 + 0.5) * h).map(|k| k * h.sqrt()))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: grid.to_vec(),
            cell,
            weights,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    /// Draws one path. Grid points that are not multiples of the cell use their own
    /// cell width, so the noise is only shared exactly between commensurate times.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let max_cells = self.weights.iter().map(Vec::len).max().unwrap_or(0);
        let noise: Vec<f64> = (0..max_cells).map(|_| rng.sample(StandardNormal)).collect();
        self.weights
            .iter()
            .map(|w| w.iter().zip(&noise).map(|(a, z)| a * z).sum())
            .collect()
    }
}

/// One fBm path on `grid`, seeded deterministically.
pub fn fbm_sample(grid: &[f64], seed: u64) -> Result<Vec<f64>> {
    let sampler = FbmSampler::new(grid)?;
    Ok(sampler.sample(&mut aux_rng(seed)))
}

/// `W[i][j] = int_{cell j} K(t_i, s) ds` on a uniform grid, lower triangular.
fn product_matrix(grid: &[f64]) -> Result<DMatrix<f64>> {
    let m = grid.len() - 1;
    let kernel = FbmKernel::get();
    let mut w = DMatrix::zeros(m, m);
    for i in 0..m {
        let t = grid[i + 1];
        for j in 0..=i {
            w[(i, j)] = kernel.cell_integral(t, grid[j], grid[j + 1])?;
        }
    }
    Ok(w)
}

/// Outcome of inverting a path through the Volterra kernel.
#[derive(Debug, Clone, Serialize)]
pub struct PathRateReport {
    /// `(1/2) int gamma_dot^2`, or infinity when the residual is too large.
    pub value: f64,
    /// Same quantity from the regularized solution, always finite.
    pub regularized_value: f64,
    pub relative_residual: f64,
    pub threshold: f64,
    pub tikhonov: f64,
}

/// Sample-path rate of `gamma` on a uniform grid starting at 0.
pub fn i_path(gamma: &[f64], grid: &[f64]) -> Result<f64> {
    Ok(i_path_report(gamma, grid)?.value)
}

pub fn i_path_report(gamma: &[f64], grid: &[f64]) -> Result<PathRateReport> {
    let dt = check_grid(grid, 64)?;
    if gamma.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "path has {} values on a grid of {}",
            gamma.len(),
            grid.len()
        )));
    }
    let w = product_matrix(grid)?;
    let target = DVector::from_iterator(gamma.len() - 1, gamma[1..].iter().copied());
    let norm = target.norm();
    let tikhonov = 1e-8 * w.norm_squared();
    if norm == 0.0 {
        return Ok(PathRateReport {
            value: 0.0,
            regularized_value: 0.0,
            relative_residual: 0.0,
            threshold: I_PATH_RESIDUAL_THRESHOLD,
            tikhonov,
        });
    }
    let wt = w.transpose();
    let normal = &wt * &w + DMatrix::identity(w.ncols(), w.ncols()) * tikhonov;
    let rhs = &wt * &target;
    let rate = normal
        .cholesky()
        .ok_or_else(|| Error::Singular("regularized normal equations".into()))?
        .solve(&rhs);
    let relative_residual = (&w * &rate - &target).norm() / norm;
    let regularized_value = 0.5 * rate.norm_squared() * dt;
    let value = if relative_residual > I_PATH_RESIDUAL_THRESHOLD {
        f64::INFINITY
    } else {
        regularized_value
    };
    Ok(PathRateReport {
        value,
        regularized_value,
        relative_residual,
        threshold: I_PATH_RESIDUAL_THRESHOLD,
        tikhonov,
    })
}

/// `gamma(t_i) = int_0^{t_i} K(t_i, s) rate(s) ds` for a rate constant on grid cells.
pub fn forward_path(rate: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    check_grid(grid, 2)?;
    if rate.len() + 1 != grid.len() {
        return Err(Error::GridMismatch("need one rate value per grid cell".into()));
    }
    let w = product_matrix(grid)?;
    let out = &w * DVector::from_column_slice(rate);
    Ok(std::iter::once(0.0).chain(out.iter().copied()).collect())
}

/// `min (1/2) int gamma_dot^2` subject to `gamma(t_i) = alpha_i`, divided by `sigma^2`.
pub fn minimize_path_rate(alpha: &[f64], times: &[f64], grid: &[f64], rho: f64) -> Result<f64> {
    let dt = check_grid(grid, 2)?;
    if alpha.len() != times.len() || times.is_empty() {
        return Err(Error::InvalidParams("alpha and times must have equal nonzero length".into()));
    }
    let s2 = sigma_sq(rho)?;
    if s2 == 0.0 {
        return Err(Error::DensityOutOfRange(rho));
    }
    if alpha.iter().all(|&a| a == 0.0) {
        return Ok(0.0);
    }
    let kernel = FbmKernel::get();
    let m = grid.len() - 1;
    let k = times.len();
    let mut constraint = DMatrix::zeros(k, m);
    for (i, &t) in times.iter().enumerate() {
        let idx = grid
            .iter()
            .position(|&g| (g - t).abs() <= 1e-9 * grid[m])
            .filter(|&p| p > 0)
            .ok_or_else(|| Error::GridMismatch(format!("time {t} is not a positive grid point")))?;
        for j in 0..idx {
            constraint[(i, j)] = kernel.cell_integral(t, grid[j], grid[j + 1])?;
        }
    }
    // stationarity: dt x + C^T lambda = 0, C x = alpha
    let mut kkt = DMatrix::zeros(m + k, m + k);
    for j in 0..m {
        kkt[(j, j)] = dt;
    }
    kkt.view_mut((0, m), (m, k)).copy_from(&constraint.transpose());
    kkt.view_mut((m, 0), (k, m)).copy_from(&constraint);
    let mut rhs = DVector::zeros(m + k);
    for i in 0..k {
        rhs[m + i] = alpha[i];
    }
    let sol = kkt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("constraint system is infeasible".into()))?;
    let x = sol.rows(0, m);
    Ok(0.5 * x.norm_squared() * dt / s2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_values() {
        assert_eq!(fbm_cov(0.0, 3.0), 0.0);
        assert!((fbm_cov(2.0, 2.0) - 2f64.powf(1.5)).abs() < 1e-14);
        assert!((fbm_cov(1.0, 2.0) - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn cov_matrix_rejects_unsorted() {
        assert!(matches!(cov_matrix(&[1.0, 1.0]), Err(Error::NonIncreasingTimes(_))));
        assert!(matches!(cov_matrix(&[2.0, 1.0]), Err(Error::NonIncreasingTimes(_))));
        assert!(cov_matrix(&[0.5, 1.0, 3.0]).is_ok());
    }

    #[test]
    fn sigma_values() {
        assert!((sigma_sq(0.5).unwrap() - 0.265_961_52).abs() < 1e-8);
        assert_eq!(sigma_sq(0.0).unwrap(), 0.0);
        assert!((sigma_sq(0.2).unwrap() - sigma_sq(0.8).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn one_point_rate() {
        let r = finite_dim_rate(&[1.0], &[1.0], 0.5).unwrap();
        assert!((r - 1.879_96).abs() < 2e-5);
        assert_eq!(finite_dim_rate(&[0.0, 0.0], &[1.0, 2.0], 0.5).unwrap(), 0.0);
        assert!(matches!(finite_dim_rate(&[1.0, 1.0], &[1.0, 1.0], 0.5), Err(Error::Singular(_))));
    }

    #[test]
    fn kernel_normalization() {
        let k = FbmKernel::get();
        assert!((k.beta_integral - 5.244_115_108_584_24).abs() < 1e-10);
        assert!((k.c_k - 0.267_412).abs() < 1e-6);
        assert!(matches!(fbm_kernel(1.0, 1.0), Err(Error::KernelDomain { .. })));
    }

    #[test]
    fn grid_validation() {
        let g: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        assert!(matches!(i_path(&[0.0; 10], &g), Err(Error::NonUniformGrid { min: 64 })));
        let mut g: Vec<f64> = (0..65).map(|i| i as f64 / 64.0).collect();
        g[3] += 1e-3;
        assert!(matches!(i_path(&[0.0; 65], &g), Err(Error::NonUniformGrid { .. })));
    }
}
