//! Quadratic functionals of profile pairs and the closed-form identities
//! they satisfy.

use std::f64::consts::PI;

use serde::Serialize;

use super::fbm::{fbm_cov, sigma_sq};
use super::hydro::{cosine_map, space_points};
use super::profile::{c0_shape, sort_dedup, KernelTerm, ProfilePair};
use crate::error::Result;
use crate::params::chi;
use crate::quadrature::{integrate, integrate_breaks, Tol};

const INNER_TOL: Tol = Tol::new(1e-14, 1e-12);
const OUTER_TOL: Tol = Tol::new(1e-13, 1e-11);

/// `int phi_p phi_q dv`.
pub fn l2_inner(p: &ProfilePair, q: &ProfilePair) -> Result<f64> {
    if p.is_zero() || q.is_zero() {
        return Ok(0.0);
    }
    let x = p.extent().max(q.extent());
    integrate_breaks(|v| p.phi(v) * q.phi(v), &space_points(x, &[p, q], Some(0.0)), INNER_TOL)
}

/// `[H, G] = int_0^inf int d_v H d_v G dv dr` in one dimension.
pub fn inner_h1(p: &ProfilePair, q: &ProfilePair) -> Result<f64> {
    if p.is_zero() || q.is_zero() {
        return Ok(0.0);
    }
    let horizon = p.horizon().min(q.horizon());
    if horizon <= 0.0 {
        return Ok(0.0);
    }
    let x = p.extent().max(q.extent());
    let mut pts = vec![0.0, horizon];
    pts.extend(p.time_breaks());
    pts.extend(q.time_breaks());
    pts.retain(|&b| (0.0..=horizon).contains(&b));
    sort_dedup(&mut pts);
    let mut failure = None;
    let mut total = 0.0;
    for seg in pts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        total += integrate(
            |th| {
                let (r, jac) = cosine_map(a, b, th);
                if jac == 0.0 {
                    return 0.0;
                }
                let inner = integrate_breaks(
                    |v| p.hgrad(r, v) * q.hgrad(r, v),
                    &space_points(x, &[p, q], Some(r)),
                    INNER_TOL,
                );
                match inner {
                    Ok(v) => v * jac,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            0.0,
            1.0,
            OUTER_TOL,
        )?;
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// `chi / 2 * ||phi||^2`.
pub fn q0(profile: &ProfilePair, rho: f64) -> Result<f64> {
    Ok(0.5 * chi(rho)? * l2_inner(profile, profile)?)
}

/// `chi / 2 * [H, H]`.
pub fn qdyn(profile: &ProfilePair, rho: f64) -> Result<f64> {
    Ok(0.5 * chi(rho)? * inner_h1(profile, profile)?)
}

/// Total cost `q0 + qdyn` of steering the fluctuation field with `profile`.
pub fn q_rate(profile: &ProfilePair, rho: f64) -> Result<f64> {
    Ok(q0(profile, rho)? + qdyn(profile, rho)?)
}

/// `<phi_p, phi_q> + [H_p, H_q]`, the inner product behind the rate.
pub fn energy_inner(p: &ProfilePair, q: &ProfilePair) -> Result<f64> {
    Ok(l2_inner(p, q)? + inner_h1(p, q)?)
}

/// A quadrature value next to the closed form it should match.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IntegralCheck {
    pub quadrature: f64,
    pub closed_form: f64,
}

impl IntegralCheck {
    pub fn rel_error(&self) -> f64 {
        (self.quadrature - self.closed_form).abs() / self.closed_form.abs().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IntegralChecks {
    pub horizon: f64,
    /// `int (int_0^T p_s(v) ds)^2 dv`.
    pub initial_energy: IntegralCheck,
    /// `int_0^T int (int_0^{T-r} p_s'(v) ds)^2 dv dr`.
    pub dynamic_energy: IntegralCheck,
    /// Constraint integral up to `T` of the unit-strength optimizer for time `2T`.
    pub cross: IntegralCheck,
}

impl IntegralChecks {
    pub fn max_rel_error(&self) -> f64 {
        self.initial_energy
            .rel_error()
            .max(self.dynamic_energy.rel_error())
            .max(self.cross.rel_error())
    }
}

/// Evaluates the three kernel integrals at horizon `t` by quadrature.
pub fn verify_integrals(t: f64) -> Result<IntegralChecks> {
    let unit = |time: f64| ProfilePair::from_kernels(vec![KernelTerm { weight: 1.0, time }]);
    let (near, far) = (unit(t), unit(2.0 * t));
    let scale = t.powf(1.5) / (3.0 * PI.sqrt());
    let initial_energy = IntegralCheck {
        quadrature: l2_inner(&near, &near)?,
        closed_form: 4.0 * (2.0 - 2f64.sqrt()) * scale,
    };
    let dynamic_energy = IntegralCheck {
        quadrature: inner_h1(&near, &near)?,
        closed_form: 8.0 * (2f64.sqrt() - 1.0) * scale,
    };
    // chi * (<phi_far, phi_near> + [H_far, H_near]) times the amplitude c0(2T, 1)
    // equals a(T, 2T) / (2T)^{3/2}; chi cancels against the amplitude.
    let amplitude = c0_shape() / (2.0 * t).powf(1.5);
    let cross = IntegralCheck {
        quadrature: amplitude * energy_inner(&far, &near)?,
        closed_form: fbm_cov(t, 2.0 * t) / (2.0 * t).powf(1.5),
    };
    Ok(IntegralChecks {
        horizon: t,
        initial_energy,
        dynamic_energy,
        cross,
    })
}

/// `sigma^2 T^{3/2} / chi`, the sum of the first two closed forms.
pub fn energy_sum_closed_form(t: f64, rho: f64) -> Result<f64> {
    Ok(sigma_sq(rho)? * t.powf(1.5) / chi(rho)?)
}
