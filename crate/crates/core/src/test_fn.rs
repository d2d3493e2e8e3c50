//! Space-time test functions with analytic derivatives.

use crate::lattice::MAX_DIM;

/// A function of space only, vanishing outside a centered ball.
pub trait SpatialFn: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, u: &[f64]) -> f64;
    /// Radius of a centered ball outside of which the value is 0.
    fn support_radius(&self) -> f64;
}

/// A `C^{1,inf}` function of `(t, u)` with compact spatial support.
pub trait TestFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, t: f64, u: &[f64]) -> f64;
    fn grad(&self, t: f64, u: &[f64], out: &mut [f64]);
    fn laplacian(&self, t: f64, u: &[f64]) -> f64;
    fn dt(&self, t: f64, u: &[f64]) -> f64;
    fn support_radius(&self) -> f64;
    /// Upper bound on `|d_i H|` over all times, points and axes.
    fn grad_bound(&self) -> f64;

    /// Partial derivative along one axis.
    fn grad_axis(&self, t: f64, u: &[f64], axis: usize) -> f64 {
        let mut g = [0.0; MAX_DIM];
        self.grad(t, u, &mut g[..self.dim()]);
        g[axis]
    }

    fn is_zero(&self) -> bool {
        false
    }

    fn is_static(&self) -> bool {
        false
    }
}

/// The zero function in any dimension.
#[derive(Debug, Clone, Copy)]
pub struct Zero {
    dim: usize,
}

impl Zero {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl SpatialFn for Zero {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _u: &[f64]) -> f64 {
        0.0
    }
    fn support_radius(&self) -> f64 {
        0.0
    }
}

impl TestFunction for Zero {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _t: f64, _u: &[f64]) -> f64 {
        0.0
    }
    fn grad(&self, _t: f64, _u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn laplacian(&self, _t: f64, _u: &[f64]) -> f64 {
        0.0
    }
    fn dt(&self, _t: f64, _u: &[f64]) -> f64 {
        0.0
    }
    fn support_radius(&self) -> f64 {
        0.0
    }
    fn grad_bound(&self) -> f64 {
        0.0
    }
    fn is_zero(&self) -> bool {
        true
    }
    fn is_static(&self) -> bool {
        true
    }
}

/// Smooth bump `A exp(1 - 1/(1 - |u-c|^2/R^2))` with peak value `A` at the center.
#[derive(Debug, Clone, Copy)]
pub struct Bump {
    dim: usize,
    center: [f64; MAX_DIM],
    radius: f64,
    amplitude: f64,
    grad_bound: f64,
}

impl Bump {
    pub fn new(dim: usize, radius: f64, amplitude: f64) -> Self {
        Self::centered_at(dim, &[0.0; MAX_DIM][..dim], radius, amplitude)
    }

    pub fn centered_at(dim: usize, center: &[f64], radius: f64, amplitude: f64) -> Self {
        assert!(radius > 0.0);
        let mut c = [0.0; MAX_DIM];
        c[..dim].copy_from_slice(&center[..dim]);
        // sup_r |g'(q)| 2r/R^2 on a fine radial grid, with a small margin
        let mut sup = 0.0f64;
        for k in 1..4096 {
            let r = radius * k as f64 / 4096.0;
            let q = (r / radius).powi(2);
            sup = sup.max(profile(q).1.abs() * 2.0 * r / (radius * radius));
        }
        Self {
            dim,
            center: c,
            radius,
            amplitude,
            grad_bound: 1.01 * sup * amplitude.abs(),
        }
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    fn rel(&self, u: &[f64]) -> ([f64; MAX_DIM], f64) {
        let mut z = [0.0; MAX_DIM];
        let mut r2 = 0.0;
        for i in 0..self.dim {
            z[i] = u[i] - self.center[i];
            r2 += z[i] * z[i];
        }
        (z, r2 / (self.radius * self.radius))
    }

    fn eval(&self, u: &[f64]) -> f64 {
        let (_, q) = self.rel(u);
        self.amplitude * profile(q).0
    }

    fn eval_grad(&self, u: &[f64], out: &mut [f64]) {
        let (z, q) = self.rel(u);
        let dg = profile(q).1;
        let s = self.amplitude * dg * 2.0 / (self.radius * self.radius);
        for i in 0..self.dim {
            out[i] = s * z[i];
        }
    }

    fn eval_laplacian(&self, u: &[f64]) -> f64 {
        let (_, q) = self.rel(u);
        let (_, dg, d2g) = profile(q);
        let r2 = self.radius * self.radius;
        self.amplitude * (d2g * 4.0 * q / r2 + dg * 2.0 * self.dim as f64 / r2)
    }

    fn outer_radius(&self) -> f64 {
        let c2: f64 = self.center[..self.dim].iter().map(|c| c * c).sum();
        c2.sqrt() + self.radius
    }
}

/// `g(q) = exp(1 - 1/(1-q))` and its first two derivatives in `q`.
fn profile(q: f64) -> (f64, f64, f64) {
    if q >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let w = 1.0 - q;
    let g = (1.0 - 1.0 / w).exp();
    let dg = -g / (w * w);
    let d2g = g * (2.0 * q - 1.0) / (w * w * w * w);
    (g, dg, d2g)
}

impl SpatialFn for Bump {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, u: &[f64]) -> f64 {
        self.eval(u)
    }
    fn support_radius(&self) -> f64 {
        self.outer_radius()
    }
}

impl TestFunction for Bump {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _t: f64, u: &[f64]) -> f64 {
        self.eval(u)
    }
    fn grad(&self, _t: f64, u: &[f64], out: &mut [f64]) {
        self.eval_grad(u, out)
    }
    fn laplacian(&self, _t: f64, u: &[f64]) -> f64 {
        self.eval_laplacian(u)
    }
    fn dt(&self, _t: f64, _u: &[f64]) -> f64 {
        0.0
    }
    fn support_radius(&self) -> f64 {
        self.outer_radius()
    }
    fn grad_bound(&self) -> f64 {
        self.grad_bound
    }
    fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }
    fn is_static(&self) -> bool {
        true
    }
}

/// `(1 + slope t)` times a bump: a genuinely time-dependent test function.
#[derive(Debug, Clone, Copy)]
pub struct RampedBump {
    pub bump: Bump,
    pub slope: f64,
    /// Horizon over which `grad_bound` is valid.
    pub horizon: f64,
}

impl RampedBump {
    pub fn new(bump: Bump, slope: f64, horizon: f64) -> Self {
        Self {
            bump,
            slope,
            horizon,
        }
    }

    fn factor(&self, t: f64) -> f64 {
        1.0 + self.slope * t
    }
}

impl TestFunction for RampedBump {
    fn dim(&self) -> usize {
        self.bump.dim
    }
    fn value(&self, t: f64, u: &[f64]) -> f64 {
        self.factor(t) * self.bump.eval(u)
    }
    fn grad(&self, t: f64, u: &[f64], out: &mut [f64]) {
        self.bump.eval_grad(u, out);
        let f = self.factor(t);
        out.iter_mut().for_each(|g| *g *= f);
    }
    fn laplacian(&self, t: f64, u: &[f64]) -> f64 {
        self.factor(t) * self.bump.eval_laplacian(u)
    }
    fn dt(&self, _t: f64, u: &[f64]) -> f64 {
        self.slope * self.bump.eval(u)
    }
    fn support_radius(&self) -> f64 {
        self.bump.outer_radius()
    }
    fn grad_bound(&self) -> f64 {
        let f = self.factor(0.0).abs().max(self.factor(self.horizon).abs());
        self.bump.grad_bound * f
    }
    fn is_zero(&self) -> bool {
        self.bump.amplitude == 0.0
    }
}

/// Freezes a test function at one time.
pub struct AtTime<'a> {
    pub h: &'a dyn TestFunction,
    pub t: f64,
}

impl SpatialFn for AtTime<'_> {
    fn dim(&self) -> usize {
        self.h.dim()
    }
    fn value(&self, u: &[f64]) -> f64 {
        self.h.value(self.t, u)
    }
    fn support_radius(&self) -> f64 {
        self.h.support_radius()
    }
}

/// Spatial function given by a closure.
pub struct FnSpatial<F> {
    dim: usize,
    radius: f64,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnSpatial<F> {
    pub fn new(dim: usize, radius: f64, f: F) -> Self {
        Self { dim, radius, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> SpatialFn for FnSpatial<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, u: &[f64]) -> f64 {
        (self.f)(u)
    }
    fn support_radius(&self) -> f64 {
        self.radius
    }
}
