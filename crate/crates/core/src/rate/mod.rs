//! Deterministic numerics for the rate functions: heat kernels, the driven
//! hydrodynamic equation, quadratic cost functionals, explicit minimizers
//! and fractional Brownian motion.

pub mod fbm;
pub mod functionals;
pub mod hydro;
pub mod kernels;
pub mod profile;

pub use fbm::{
    cov_matrix, fbm_cov, fbm_kernel, fbm_sample, finite_dim_rate, forward_path, i_path, i_path_report,
    minimize_path_rate, sigma_sq, CovMatrix, FbmKernel, FbmSampler, PathRateReport,
};
pub use functionals::{
    energy_inner, inner_h1, l2_inner, q0, q_rate, qdyn, verify_integrals, IntegralCheck, IntegralChecks,
};
pub use hydro::{constraint_integral, field_prediction, solve_mu, weak_solution_residual, weak_solution_residual_with};
pub use kernels::{heat_kernel, k0, k1, p1};
pub use profile::{c0, minimizer_multi, optimal_profile, KernelTerm, ProfilePair, ProfileTilt};
