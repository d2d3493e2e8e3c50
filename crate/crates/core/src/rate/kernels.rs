//! Gaussian heat kernels and their closed-form time integrals.

use std::f64::consts::PI;

use libm::erfc;

use crate::error::{Error, Result};

/// Transition density of standard `d`-dimensional Brownian motion at time `t`.
pub fn heat_kernel(t: f64, u: &[f64]) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::NonPositiveTime(t));
    }
    let r2: f64 = u.iter().map(|x| x * x).sum();
    Ok((2.0 * PI * t).powf(-0.5 * u.len() as f64) * (-r2 / (2.0 * t)).exp())
}

/// One-dimensional heat kernel; zero for `t <= 0`.
#[inline]
pub fn p1(t: f64, v: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    (-v * v / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// `int_0^tau p_s(v) ds`.
#[inline]
pub fn k0(tau: f64, v: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let a = v.abs();
    (2.0 * tau / PI).sqrt() * (-a * a / (2.0 * tau)).exp() - a * erfc(a / (2.0 * tau).sqrt())
}

/// `int_0^tau d_v p_s(v) ds = d_v k0(tau, v)`; jumps at `v = 0` where it returns 0.
#[inline]
pub fn k1(tau: f64, v: f64) -> f64 {
    if tau <= 0.0 || v == 0.0 {
        return 0.0;
    }
    -v.signum() * erfc(v.abs() / (2.0 * tau).sqrt())
}
