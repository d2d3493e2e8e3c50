//! Numerical integration: globally adaptive Gauss–Kronrod (7/15 points),
//! Gauss–Legendre rules of any order, and the cheap refine-once Gauss rule
//! used along trajectories.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Error targets: stop when `err <= max(abs, rel |I|)`.
#[derive(Debug, Clone, Copy)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tol {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_intervals: 4000,
        }
    }
}

impl Default for Tol {
    fn default() -> Self {
        Self::new(1e-12, 1e-10)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let s = f(c - h * x) + f(c + h * x);
        kron += w * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let err = ((kron - gauss) * h).abs();
    (kron * h, err)
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: Tol) -> Result<f64> {
    integrate_breaks(f, &[a, b], tol)
}

/// Adaptive integral over `[points[0], points[last]]`, never evaluating across
/// the interior break points (where `f` may have kinks or jumps).
pub fn integrate_breaks<F: FnMut(f64) -> f64>(mut f: F, points: &[f64], tol: Tol) -> Result<f64> {
    assert!(points.len() >= 2);
    let mut heap = BinaryHeap::new();
    let (mut total, mut total_err) = (0.0, 0.0);
    for w in points.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let (value, err) = gk15(&mut f, w[0], w[1]);
        total += value;
        total_err += err;
        heap.push(Piece {
            a: w[0],
            b: w[1],
            value,
            err,
        });
    }
    while total_err > tol.abs.max(tol.rel * total.abs()) {
        if heap.len() >= tol.max_intervals {
            return Err(Error::Quadrature {
                a: points[0],
                b: points[points.len() - 1],
                estimate: total,
                error: total_err,
            });
        }
        let Some(p) = heap.pop() else { break };
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            // interval exhausted at machine precision; accept its contribution
            heap.push(Piece { err: 0.0, ..p });
            total_err -= p.err;
            continue;
        }
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        total += v1 + v2 - p.value;
        total_err += e1 + e2 - p.err;
        heap.push(Piece {
            a: p.a,
            b: m,
            value: v1,
            err: e1,
        });
        heap.push(Piece {
            a: m,
            b: p.b,
            value: v2,
            err: e2,
        });
    }
    // resum to shed accumulated rounding in the running total
    Ok(heap.iter().map(|p| p.value).sum())
}

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule with `panels` equal panels of `order` points.
pub fn composite_gl<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            total += wi * f(c + 0.5 * h * xi);
        }
    }
    0.5 * h * total
}

const G3X: f64 = 0.774_596_669_241_483_4;
const G3W: [f64; 2] = [5.0 / 9.0, 8.0 / 9.0];

#[inline]
fn gauss3<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    h * (G3W[0] * (f(c - h * G3X) + f(c + h * G3X)) + G3W[1] * f(c))
}

/// Three-point Gauss on `[a, b]` compared against the same rule on both halves;
/// when they disagree beyond `1e-9` relative the interval is refined once more
/// (quarters) and that estimate is returned.
#[inline]
pub fn gauss3_refined<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let whole = gauss3(&mut f, a, b);
    let m = 0.5 * (a + b);
    let halves = gauss3(&mut f, a, m) + gauss3(&mut f, m, b);
    if (halves - whole).abs() <= 1e-9 * halves.abs().max(1e-300) {
        return halves;
    }
    let q1 = 0.5 * (a + m);
    let q3 = 0.5 * (m + b);
    gauss3(&mut f, a, q1) + gauss3(&mut f, q1, m) + gauss3(&mut f, m, q3) + gauss3(&mut f, q3, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_exact() {
        for m in 1..12 {
            let (x, w) = gauss_legendre(m);
            for deg in 0..2 * m {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 0 { 2.0 / (deg + 1) as f64 } else { 0.0 };
                assert!((s - exact).abs() < 1e-13, "m={m} deg={deg}");
            }
        }
    }

    #[test]
    fn adaptive_handles_sqrt_singularity() {
        let v = integrate(|x: f64| x.sqrt(), 0.0, 1.0, Tol::new(1e-13, 1e-12)).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn breakpoints_handle_jumps() {
        let f = |x: f64| if x < 0.3 { 1.0 } else { 2.0 };
        let v = integrate_breaks(f, &[0.0, 0.3, 1.0], Tol::default()).unwrap();
        assert!((v - 1.7).abs() < 1e-14);
    }

    #[test]
    fn gives_up_with_error() {
        let tol = Tol {
            max_intervals: 10,
            ..Tol::new(1e-15, 1e-15)
        };
        assert!(integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, tol).is_err());
    }

    #[test]
    fn refine_once_rule() {
        let v = gauss3_refined(|s: f64| s.exp(), 0.0, 0.01);
        assert!((v - (0.01f64.exp() - 1.0)).abs() < 1e-15);
        let v = gauss3_refined(|s: f64| (20.0 * s).sin(), 0.0, 1.0);
        assert!((v - (1.0 - 20f64.cos()) / 20.0).abs() < 1e-3);
    }
}
