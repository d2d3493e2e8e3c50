//! The linear hydrodynamic equation driven by a profile pair,
//! `d_t mu = (1/2) mu'' - chi (d_v H)'`, `mu(0) = chi phi`, solved by
//! heat-kernel convolution.

use std::f64::consts::PI;

use super::kernels::p1;
use super::profile::{sort_dedup, ProfilePair};
use crate::error::{Error, Result};
use crate::params::chi;
use crate::quadrature::{gauss_legendre, integrate, integrate_breaks, Tol};
use crate::test_fn::TestFunction;

const INNER_TOL: Tol = Tol::new(1e-13, 1e-11);
const OUTER_TOL: Tol = Tol::new(1e-12, 1e-10);
/// Standard normal tails beyond this many deviations are dropped.
const GAUSS_CUT: f64 = 10.0;
const WIDTH_MULTIPLES: [f64; 3] = [0.5, 2.0, 6.0];

/// Sorted breakpoints in `[lo, hi]` made of the ends, the interior images of
/// `breaks` and `breaks +- k * widths`, all mapped by `map`.
fn breakpoints(lo: f64, hi: f64, breaks: &[f64], widths: &[f64], map: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    for &b in breaks {
        pts.push(map(b));
        for &w in widths {
            for k in WIDTH_MULTIPLES {
                pts.push(map(b - k * w));
                pts.push(map(b + k * w));
            }
        }
    }
    pts.retain(|p| p.is_finite() && *p >= lo && *p <= hi);
    sort_dedup(&mut pts);
    pts
}

/// Space breakpoints on `[-x, x]` for integrands built from `profiles` at time `r`.
pub(crate) fn space_points(x: f64, profiles: &[&ProfilePair], r: Option<f64>) -> Vec<f64> {
    let mut breaks = Vec::new();
    let mut widths = Vec::new();
    for p in profiles {
        breaks.extend(p.space_breaks());
        if let Some(r) = r {
            widths.extend(p.widths_at(r));
        }
    }
    breakpoints(-x, x, &breaks, &widths, |v| v)
}

/// `mu(t, u)` for the profile at density `rho`.
pub fn solve_mu(profile: &ProfilePair, rho: f64, t: f64, u: f64) -> Result<f64> {
    let c = chi(rho)?;
    if !(t >= 0.0) {
        return Err(Error::InvalidParams(format!("time {t} must be nonnegative")));
    }
    if t == 0.0 {
        return Ok(c * profile.phi(u));
    }
    Ok(c * (initial_term(profile, t, u)? + drive_term(profile, t, u)?))
}

/// `int p_t(u - v) phi(v) dv`, written as `int p_1(y) phi(u - sqrt(t) y) dy`.
fn initial_term(profile: &ProfilePair, t: f64, u: f64) -> Result<f64> {
    let st = t.sqrt();
    let x = profile.extent();
    let lo = (-GAUSS_CUT).max((u - x) / st);
    let hi = GAUSS_CUT.min((u + x) / st);
    if lo >= hi {
        return Ok(0.0);
    }
    let widths: Vec<f64> = profile.widths_at(0.0);
    let pts = breakpoints(lo, hi, &profile.space_breaks(), &widths, |b| (u - b) / st);
    integrate_breaks(|y| p1(1.0, y) * profile.phi(u - st * y), &pts, INNER_TOL)
}

/// `int_0^t int d_v[p_{t-r}(u - v)] g(r, v) dv dr` with `g = d_v H`, rewritten via
/// `r = t (1 - w^2)` and `v = u - sqrt(t) w y` as
/// `2 sqrt(t) int_0^1 int y p_1(y) g(t (1 - w^2), u - sqrt(t) w y) dy dw`.
fn drive_term(profile: &ProfilePair, t: f64, u: f64) -> Result<f64> {
    if profile.is_zero() || profile.horizon() <= 0.0 {
        return Ok(0.0);
    }
    let st = t.sqrt();
    let x = profile.extent();
    let space_breaks = profile.space_breaks();
    let mut wpts = vec![0.0, 1.0];
    for b in profile.time_breaks() {
        if b > 0.0 && b < t {
            wpts.push((1.0 - b / t).sqrt());
        }
    }
    sort_dedup(&mut wpts);
    let mut failure = None;
    let outer = integrate_breaks(
        |w| {
            if w <= 0.0 {
                return 0.0;
            }
            let r = t * (1.0 - w * w);
            let scale = st * w;
            let lo = (-GAUSS_CUT).max((u - x) / scale);
            let hi = GAUSS_CUT.min((u + x) / scale);
            if lo >= hi {
                return 0.0;
            }
            let widths = profile.widths_at(r);
            let pts = breakpoints(lo, hi, &space_breaks, &widths, |b| (u - b) / scale);
            match integrate_breaks(|y| y * p1(1.0, y) * profile.hgrad(r, u - scale * y), &pts, INNER_TOL) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        &wpts,
        OUTER_TOL,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(2.0 * st * outer)
}

/// `int_0^t mu(s, 0) ds`.
pub fn constraint_integral(profile: &ProfilePair, rho: f64, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let mut failure = None;
    let mut total = 0.0;
    for (a, b) in time_segments(profile, t) {
        total += integrate(
            |th| {
                let (s, jac) = cosine_map(a, b, th);
                if jac == 0.0 {
                    return 0.0;
                }
                match solve_mu(profile, rho, s, 0.0) {
                    Ok(m) => m * jac,
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

/// `int mu(t, u) G(t, u) du` for a one-dimensional test function.
pub fn field_prediction(profile: &ProfilePair, rho: f64, g: &dyn TestFunction, t: f64) -> Result<f64> {
    let radius = g.support_radius();
    let mut failure = None;
    let v = integrate_breaks(
        |u| {
            let gv = g.value(t, &[u]);
            if gv == 0.0 {
                return 0.0;
            }
            match solve_mu(profile, rho, t, u) {
                Ok(m) => m * gv,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        &space_points(radius, &[profile], Some(t)),
        INNER_TOL,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `[0, t]` split at the profile's time breaks.
pub(crate) fn time_segments(profile: &ProfilePair, t: f64) -> Vec<(f64, f64)> {
    let mut pts = vec![0.0, t];
    pts.extend(profile.time_breaks().into_iter().filter(|&b| b > 0.0 && b < t));
    sort_dedup(&mut pts);
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// `s = a + (b - a)(1 - cos(pi theta)) / 2` and its Jacobian.
#[inline]
pub(crate) fn cosine_map(a: f64, b: f64, th: f64) -> (f64, f64) {
    let h = b - a;
    (a + 0.5 * h * (1.0 - (PI * th).cos()), 0.5 * h * PI * (PI * th).sin())
}

/// Residual of the weak formulation at time `t` for a test function in one dimension,
/// with the default grid.
pub fn weak_solution_residual(
    profile: &ProfilePair,
    rho: f64,
    g: &dyn TestFunction,
    t: f64,
) -> Result<f64> {
    weak_solution_residual_with(profile, rho, g, t, 8)
}

const GL_ORDER: usize = 8;

fn panel_nodes(pts: &[f64], panels: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(GL_ORDER);
    let mut out = Vec::new();
    for seg in pts.windows(2) {
        let h = (seg[1] - seg[0]) / panels as f64;
        for p in 0..panels {
            let c = seg[0] + (p as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(&w) {
                out.push((c + 0.5 * h * xi, 0.5 * h * wi));
            }
        }
    }
    out
}

/// Same as [`weak_solution_residual`], with `panels` Gauss panels per break interval
/// in both the time and the space integral of the bulk term.
pub fn weak_solution_residual_with(
    profile: &ProfilePair,
    rho: f64,
    g: &dyn TestFunction,
    t: f64,
    panels: usize,
) -> Result<f64> {
    if g.dim() != 1 {
        return Err(Error::InvalidParams("weak residual is implemented for d = 1".into()));
    }
    let c = chi(rho)?;
    let radius = g.support_radius();
    if !radius.is_finite() {
        return Err(Error::InvalidParams("test function must have compact support".into()));
    }
    let mut breaks = vec![-radius, radius];
    breaks.extend(profile.space_breaks().into_iter().filter(|b| b.abs() < radius));
    sort_dedup(&mut breaks);
    let panels = panels.max(1);

    let gval = |s: f64, v: f64| g.value(s, &[v]);
    // terminal and initial pairings, integrated adaptively
    let space = |s: Option<f64>| space_points(radius, &[profile], s);
    let terminal = integrate_breaks(
        |v| solve_mu(profile, rho, t, v).unwrap_or(f64::NAN) * gval(t, v),
        &space(Some(t)),
        INNER_TOL,
    )?;
    if terminal.is_nan() {
        solve_mu(profile, rho, t, 0.0)?;
    }
    let initial = c * integrate_breaks(|v| profile.phi(v) * gval(0.0, v), &space(Some(0.0)), INNER_TOL)?;

    // cross term chi int int d_v G d_v H, inner integral adaptive
    let mut cross = 0.0;
    if !profile.is_zero() {
        let horizon = profile.horizon().min(t);
        let mut failure = None;
        for (a, b) in time_segments(profile, horizon) {
            cross += integrate(
                |th| {
                    let (s, jac) = cosine_map(a, b, th);
                    if jac == 0.0 {
                        return 0.0;
                    }
                    let inner = integrate_breaks(
                        |v| {
                            let mut gr = [0.0];
                            g.grad(s, &[v], &mut gr);
                            gr[0] * profile.hgrad(s, v)
                        },
                        &space(Some(s)),
                        INNER_TOL,
                    );
                    match inner {
                        Ok(x) => x * jac,
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
        if let Some(e) = failure {
            return Err(e);
        }
        cross *= c;
    }

    // bulk term int int mu (d_s + (1/2) d_vv) G on a fixed tensor grid
    let mut bulk = 0.0;
    let space_nodes = panel_nodes(&breaks, panels);
    let time_nodes = panel_nodes(&[0.0, 1.0], panels);
    for (a, b) in time_segments(profile, t) {
        for &(th, wt) in &time_nodes {
            let (s, jac) = cosine_map(a, b, th);
            for &(v, wv) in &space_nodes {
                let gen = g.dt(s, &[v]) + 0.5 * g.laplacian(s, &[v]);
                if gen == 0.0 {
                    continue;
                }
                bulk += wt * jac * wv * solve_mu(profile, rho, s, v)? * gen;
            }
        }
    }
    Ok((terminal - initial - bulk - cross).abs())
}
