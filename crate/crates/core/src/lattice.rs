//! Periodic lattice geometry, packed occupancy state and product-measure samplers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ScalingParams;
use crate::rng::initial_rng;
use crate::test_fn::SpatialFn;

pub const MAX_DIM: usize = 3;

/// Torus `(Z / side Z)^d`; site `x` has coordinates `x = sum_i c_i side^i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub d: usize,
    pub side: usize,
}

impl Lattice {
    pub fn new(d: usize, side: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&d), "dimension must be 1..=3");
        assert!(side >= 2, "side must be at least 2");
        Self { d, side }
    }

    pub fn from_params(params: &ScalingParams) -> Self {
        Self::new(params.d, params.side())
    }

    pub fn num_sites(&self) -> usize {
        self.side.pow(self.d as u32)
    }

    pub fn num_bonds(&self) -> usize {
        self.num_sites() * self.d
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.side.pow(axis as u32)
    }

    #[inline]
    pub fn coord(&self, x: usize, axis: usize) -> usize {
        (x / self.stride(axis)) % self.side
    }

    pub fn coords(&self, x: usize) -> [usize; MAX_DIM] {
        let mut c = [0; MAX_DIM];
        let mut rest = x;
        for ci in c.iter_mut().take(self.d) {
            *ci = rest % self.side;
            rest /= self.side;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .take(self.d)
            .rev()
            .fold(0, |acc, &c| acc * self.side + c % self.side)
    }

    /// Neighbour of `x` one step along `axis`, forward when `forward` is true.
    #[inline]
    pub fn neighbor(&self, x: usize, axis: usize, forward: bool) -> usize {
        let stride = self.stride(axis);
        let c = (x / stride) % self.side;
        if forward {
            if c + 1 == self.side {
                x + stride - self.side * stride
            } else {
                x + stride
            }
        } else if c == 0 {
            x + (self.side - 1) * stride
        } else {
            x - stride
        }
    }
}

/// Wraps a macroscopic coordinate into `[-l/2, l/2)`.
#[inline]
pub fn wrap_torus(u: f64, l: f64) -> f64 {
    let half = 0.5 * l;
    let w = (u + half).rem_euclid(l) - half;
    if w >= half {
        w - l
    } else {
        w
    }
}

/// Macroscopic position `(x - shift m) / n`, reduced onto the torus, of site `x`.
#[inline]
pub fn site_position(
    lattice: &Lattice,
    n: usize,
    x: usize,
    shift: f64,
    out: &mut [f64; MAX_DIM],
) {
    let nf = n as f64;
    let l = lattice.side as f64 / nf;
    let c = lattice.coords(x);
    for i in 0..lattice.d {
        out[i] = wrap_torus((c[i] as f64 - shift) / nf, l);
    }
}

/// Occupation variables packed into 64-bit words, with a cached particle count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    lattice: Lattice,
    words: Vec<u64>,
    count: usize,
}

impl Configuration {
    pub fn empty(lattice: Lattice) -> Self {
        let words = vec![0; lattice.num_sites().div_ceil(64)];
        Self {
            lattice,
            words,
            count: 0,
        }
    }

    pub fn full(lattice: Lattice) -> Self {
        Self::from_fn(lattice, |_| true)
    }

    pub fn from_fn(lattice: Lattice, mut occupied: impl FnMut(usize) -> bool) -> Self {
        let mut c = Self::empty(lattice);
        for x in 0..lattice.num_sites() {
            if occupied(x) {
                c.set(x, true);
            }
        }
        c
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn num_sites(&self) -> usize {
        self.lattice.num_sites()
    }

    pub fn particle_count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn get(&self, x: usize) -> bool {
        (self.words[x >> 6] >> (x & 63)) & 1 == 1
    }

    #[inline]
    pub fn eta(&self, x: usize) -> f64 {
        if self.get(x) {
            1.0
        } else {
            0.0
        }
    }

    pub fn set(&mut self, x: usize, value: bool) {
        let was = self.get(x);
        if was == value {
            return;
        }
        self.words[x >> 6] ^= 1 << (x & 63);
        if value {
            self.count += 1;
        } else {
            self.count -= 1;
        }
    }

    /// Moves a particle from `from` to the empty site `to`; the count is unchanged.
    #[inline]
    pub fn move_particle(&mut self, from: usize, to: usize) {
        debug_assert!(self.get(from) && !self.get(to));
        self.words[from >> 6] ^= 1 << (from & 63);
        self.words[to >> 6] ^= 1 << (to & 63);
    }

    /// Recounts set bits; used to assert the cached count.
    pub fn count_bits(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn occupied_sites(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_sites()).filter(|&x| self.get(x))
    }

    pub fn density(&self) -> f64 {
        self.count as f64 / self.num_sites() as f64
    }
}

/// Independent sites with `P(eta_x = 1) = marginal(x)`, one uniform per site in site order.
pub fn sample_product<R: Rng + ?Sized>(
    lattice: Lattice,
    marginal: impl Fn(usize) -> f64,
    rng: &mut R,
) -> Configuration {
    Configuration::from_fn(lattice, |x| rng.random::<f64>() < marginal(x))
}

/// Bernoulli product configuration at density `rho` in `[0, 1]`.
pub fn bernoulli<R: Rng + ?Sized>(lattice: Lattice, rho: f64, rng: &mut R) -> Result<Configuration> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::DensityOutOfRange(rho));
    }
    Ok(sample_product(lattice, |_| rho, rng))
}

/// Stationary product measure at the model density.
pub fn sample_bernoulli(params: &ScalingParams, seed: u64) -> Configuration {
    let lattice = Lattice::from_params(params);
    sample_product(lattice, |_| params.rho, &mut initial_rng(seed))
}

/// Site marginals `rho + chi(rho) a_n n^{-d} phi(x / n)` of the perturbed product measure.
pub fn perturbed_marginals(params: &ScalingParams, phi: &dyn SpatialFn) -> Result<Vec<f64>> {
    check_support(params, phi.support_radius())?;
    let lattice = Lattice::from_params(params);
    let weight = params.chi() * params.kappa();
    let mut pos = [0.0; MAX_DIM];
    (0..lattice.num_sites())
        .map(|x| {
            site_position(&lattice, params.n, x, 0.0, &mut pos);
            let p = params.rho + weight * phi.value(&pos[..lattice.d]);
            if (0.0..=1.0).contains(&p) {
                Ok(p)
            } else {
                Err(Error::MarginalOutOfRange { site: x, value: p })
            }
        })
        .collect()
}

/// Product measure with the perturbed marginals; uses the same uniforms as `sample_bernoulli`.
pub fn sample_perturbed(
    params: &ScalingParams,
    phi: &dyn SpatialFn,
    seed: u64,
) -> Result<Configuration> {
    let marginals = perturbed_marginals(params, phi)?;
    let lattice = Lattice::from_params(params);
    Ok(sample_product(lattice, |x| marginals[x], &mut initial_rng(seed)))
}

/// Rejects support radii that would let the function see the torus seam.
pub fn check_support(params: &ScalingParams, radius: f64) -> Result<()> {
    let side = params.l_macro as f64;
    if radius >= 0.5 * side {
        return Err(Error::SupportTooLarge { radius, side });
    }
    Ok(())
}
