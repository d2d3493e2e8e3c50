//! Exact time integrals of bond functionals along a trajectory.
//!
//! A bond functional depends on the pair `(eta_x, eta_{x+e_i})` and on time
//! through the moving frame. Between two jumps touching a bond its state is
//! frozen, so the integral splits into per-bond state periods, each of which
//! is integrated with the refine-once Gauss rule.

use crate::lattice::{Configuration, Lattice, MAX_DIM};
use crate::quadrature::gauss3_refined;

/// Bond state code `2 eta_x + eta_y` for the bond `x -> y = x + e_i`.
pub type BondState = u8;

pub const STATE_10: BondState = 2;
pub const STATE_01: BondState = 1;

pub trait BondIntegrand {
    /// Whether bonds in this state can contribute at all.
    fn active(&self, state: BondState) -> bool;
    /// Bonds whose left site stays farther than this from the origin contribute 0.
    fn reach(&self) -> f64;
    /// Integrand value at time `s` for bond `(x, axis)` in `state`.
    fn eval(&self, x: usize, axis: usize, state: BondState, s: f64) -> f64;
    /// True when the integrand does not depend on `s`; one evaluation suffices.
    fn time_independent(&self) -> bool {
        false
    }
}

/// Geometry needed to locate a site in the moving frame.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub lattice: Lattice,
    pub n: usize,
    /// Frame velocity in lattice units per unit macroscopic time.
    pub velocity: f64,
}

impl Frame {
    pub fn macro_side(&self) -> f64 {
        self.lattice.side as f64 / self.n as f64
    }

    /// Lower bound on the distance from the origin of site `x` over `[a, b]`.
    pub fn min_distance(&self, x: usize, a: f64, b: f64) -> f64 {
        let l = self.macro_side();
        let nf = self.n as f64;
        let c = self.lattice.coords(x);
        let mut d2 = 0.0;
        for ci in c.iter().take(self.lattice.d) {
            let pa = (*ci as f64 - self.velocity * a) / nf;
            let pb = (*ci as f64 - self.velocity * b) / nf;
            let (lo, hi) = if pa <= pb { (pa, pb) } else { (pb, pa) };
            // distance to the nearest multiple of l along the segment
            let k_lo = (lo / l).ceil();
            if k_lo * l <= hi {
                continue;
            }
            let dist = |p: f64| {
                let r = p.rem_euclid(l);
                r.min(l - r)
            };
            let m = dist(lo).min(dist(hi));
            d2 += m * m;
        }
        d2.sqrt()
    }

    #[inline]
    pub fn position(&self, x: usize, s: f64, out: &mut [f64; MAX_DIM]) {
        crate::lattice::site_position(&self.lattice, self.n, x, self.velocity * s, out);
    }
}

/// Running integral of a bond functional, maintained jump by jump.
pub struct BondIntegral<I> {
    pub integrand: I,
    frame: Frame,
    start: Vec<f64>,
    max_piece: f64,
    total: f64,
}

impl<I: BondIntegrand> BondIntegral<I> {
    pub fn new(integrand: I, frame: Frame, horizon: f64) -> Self {
        // cap piece length so the moving frame travels at most 1/16 per piece
        let travel_cap = if frame.velocity == 0.0 {
            f64::INFINITY
        } else {
            frame.n as f64 / (16.0 * frame.velocity.abs())
        };
        Self {
            integrand,
            frame,
            start: vec![0.0; frame.lattice.num_bonds()],
            max_piece: (horizon / 64.0).min(travel_cap),
            total: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    /// Restarts all periods at `t` without touching the running total.
    pub fn reset_start(&mut self, t: f64) {
        self.start.fill(t);
    }

    fn close(&mut self, x: usize, axis: usize, config: &Configuration, t: f64) {
        let b = x * self.frame.lattice.d + axis;
        let a = self.start[b];
        self.start[b] = t;
        if t <= a {
            return;
        }
        let y = self.frame.lattice.neighbor(x, axis, true);
        let state = ((config.get(x) as u8) << 1) | config.get(y) as u8;
        if !self.integrand.active(state) {
            return;
        }
        if self.frame.min_distance(x, a, t) > self.integrand.reach() {
            return;
        }
        self.total += self.period_integral(x, axis, state, a, t);
    }

    fn period_integral(&self, x: usize, axis: usize, state: BondState, a: f64, b: f64) -> f64 {
        let f = |s: f64| self.integrand.eval(x, axis, state, s);
        if self.integrand.time_independent() {
            return (b - a) * f(0.5 * (a + b));
        }
        let pieces = ((b - a) / self.max_piece).ceil().max(1.0) as usize;
        if pieces == 1 {
            return gauss3_refined(f, a, b);
        }
        let h = (b - a) / pieces as f64;
        (0..pieces)
            .map(|k| {
                let lo = a + k as f64 * h;
                let hi = if k + 1 == pieces { b } else { lo + h };
                gauss3_refined(f, lo, hi)
            })
            .sum()
    }

    /// Closes every bond touching `from` or `to`; call before the jump is applied.
    pub fn before_jump(&mut self, from: usize, to: usize, config: &Configuration, t: f64) {
        let lattice = self.frame.lattice;
        for site in [from, to] {
            for axis in 0..lattice.d {
                self.close(site, axis, config, t);
                self.close(lattice.neighbor(site, axis, false), axis, config, t);
            }
        }
    }

    /// Brings every bond up to time `t`.
    pub fn flush(&mut self, config: &Configuration, t: f64) {
        let lattice = self.frame.lattice;
        for x in 0..lattice.num_sites() {
            for axis in 0..lattice.d {
                self.close(x, axis, config, t);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_bound_handles_seam() {
        let frame = Frame {
            lattice: Lattice::new(1, 40),
            n: 10,
            velocity: 0.0,
        };
        // site 30 sits at -1.0 on a side-4 torus
        assert!((frame.min_distance(30, 0.0, 1.0) - 1.0).abs() < 1e-12);
        let moving = Frame {
            velocity: 10.0,
            ..frame
        };
        // from 3.0 (=-1.0) down to 2.0 (=-2.0): closest is -1.0
        assert!((moving.min_distance(30, 0.0, 1.0) - 1.0).abs() < 1e-12);
        // site 5 moves from 0.5 through 0 to -0.5
        assert_eq!(moving.min_distance(5, 0.0, 1.0), 0.0);
    }

    struct Constant;
    impl BondIntegrand for Constant {
        fn active(&self, state: BondState) -> bool {
            state == STATE_10
        }
        fn reach(&self) -> f64 {
            f64::INFINITY
        }
        fn eval(&self, _x: usize, _axis: usize, _state: BondState, s: f64) -> f64 {
            1.0 + s
        }
    }

    #[test]
    fn integrates_periods_exactly() {
        let lattice = Lattice::new(1, 8);
        let mut c = Configuration::empty(lattice);
        c.set(2, true);
        let frame = Frame {
            lattice,
            n: 4,
            velocity: 0.0,
        };
        let mut acc = BondIntegral::new(Constant, frame, 1.0);
        // bond (2,3) is in state 10 on [0, 0.5]; after the jump bond (3,4) is
        acc.before_jump(2, 3, &c, 0.5);
        c.move_particle(2, 3);
        acc.flush(&c, 1.0);
        assert!((acc.total() - 1.5).abs() < 1e-14);
    }
}
