//! Pairs `(phi, H)` of an initial perturbation and a driving field, in one
//! space dimension, together with the explicit optimizers built from heat
//! kernel time integrals.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::fbm::solve_cov;
use super::kernels::{k0, k1, p1};
use crate::error::{Error, Result};
use crate::params::chi;
use crate::test_fn::{SpatialFn, TestFunction};

/// `3 sqrt(pi) / (4 sqrt(2))`.
pub fn c0_shape() -> f64 {
    3.0 * PI.sqrt() / (4.0 * 2f64.sqrt())
}

/// Amplitude of the single-time optimizer for constraint value `alpha` at time `t`.
pub fn c0(t: f64, alpha: f64, rho: f64) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::NonPositiveTime(t));
    }
    let c = chi(rho)?;
    if c == 0.0 {
        return Err(Error::DensityOutOfRange(rho));
    }
    Ok(c0_shape() * alpha / (t.powf(1.5) * c))
}

/// `weight * (k0(time, v), k0(time - r, v))`: one kernel building block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelTerm {
    pub weight: f64,
    pub time: f64,
}

type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Kernel(Vec<KernelTerm>),
    Custom {
        phi: Fn1,
        hgrad: Fn2,
        horizon: f64,
        extent: f64,
        space_breaks: Vec<f64>,
        time_breaks: Vec<f64>,
    },
}

/// What a profile was built for.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileMeta {
    pub times: Vec<f64>,
    pub alphas: Vec<f64>,
    pub coefficients: Vec<f64>,
}

/// Initial perturbation `phi(v)` and space-time gradient `d_v H(r, v)`.
#[derive(Clone)]
pub struct ProfilePair {
    repr: Repr,
    pub meta: ProfileMeta,
}

impl std::fmt::Debug for ProfilePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.repr {
            Repr::Kernel(terms) => f.debug_struct("ProfilePair").field("kernel", terms).finish(),
            Repr::Custom { horizon, extent, .. } => f
                .debug_struct("ProfilePair")
                .field("horizon", horizon)
                .field("extent", extent)
                .finish_non_exhaustive(),
        }
    }
}

impl ProfilePair {
    pub fn zero() -> Self {
        Self::from_kernels(Vec::new())
    }

    pub fn from_kernels(terms: Vec<KernelTerm>) -> Self {
        Self {
            repr: Repr::Kernel(terms.into_iter().filter(|t| t.weight != 0.0).collect()),
            meta: ProfileMeta::default(),
        }
    }

    /// Profile given by closures. `hgrad` must vanish for `r > horizon` and `phi`,
    /// `hgrad` for `|v| > extent`; break points mark kinks or jumps.
    pub fn custom(
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        hgrad: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        horizon: f64,
        extent: f64,
        space_breaks: Vec<f64>,
        time_breaks: Vec<f64>,
    ) -> Self {
        Self {
            repr: Repr::Custom {
                phi: Arc::new(phi),
                hgrad: Arc::new(hgrad),
                horizon,
                extent,
                space_breaks,
                time_breaks,
            },
            meta: ProfileMeta::default(),
        }
    }

    pub fn kernel_terms(&self) -> Option<&[KernelTerm]> {
        match &self.repr {
            Repr::Kernel(t) => Some(t),
            Repr::Custom { .. } => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(&self.repr, Repr::Kernel(t) if t.is_empty())
    }

    pub fn phi(&self, v: f64) -> f64 {
        match &self.repr {
            Repr::Kernel(terms) => terms.iter().map(|k| k.weight * k0(k.time, v)).sum(),
            Repr::Custom { phi, .. } => phi(v),
        }
    }

    /// `d_v H(r, v)`.
    pub fn hgrad(&self, r: f64, v: f64) -> f64 {
        match &self.repr {
            Repr::Kernel(terms) => terms.iter().map(|k| k.weight * k1(k.time - r, v)).sum(),
            Repr::Custom { hgrad, horizon, .. } => {
                if r > *horizon {
                    0.0
                } else {
                    hgrad(r, v)
                }
            }
        }
    }

    /// `H(r, v)` itself, known only for kernel profiles.
    pub fn potential(&self, r: f64, v: f64) -> Option<f64> {
        self.kernel_terms()
            .map(|terms| terms.iter().map(|k| k.weight * k0(k.time - r, v)).sum())
    }

    /// Time after which `H` vanishes.
    pub fn horizon(&self) -> f64 {
        match &self.repr {
            Repr::Kernel(terms) => terms.iter().map(|k| k.time).fold(0.0, f64::max),
            Repr::Custom { horizon, .. } => *horizon,
        }
    }

    /// Half-width of the spatial window used by quadrature.
    pub fn extent(&self) -> f64 {
        match &self.repr {
            Repr::Kernel(terms) => {
                let t = terms.iter().map(|k| k.time).fold(0.0, f64::max);
                (8.0 * t.sqrt()).max(1.0)
            }
            Repr::Custom { extent, .. } => *extent,
        }
    }

    pub fn space_breaks(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Kernel(terms) if terms.is_empty() => Vec::new(),
            Repr::Kernel(_) => vec![0.0],
            Repr::Custom { space_breaks, .. } => space_breaks.clone(),
        }
    }

    pub fn time_breaks(&self) -> Vec<f64> {
        let mut t = match &self.repr {
            Repr::Kernel(terms) => terms.iter().map(|k| k.time).collect(),
            Repr::Custom { time_breaks, .. } => time_breaks.clone(),
        };
        sort_dedup(&mut t);
        t
    }

    /// Widths `sqrt(time - r)` of the kernel terms still active at `r`.
    pub fn widths_at(&self, r: f64) -> Vec<f64> {
        match &self.repr {
            Repr::Kernel(terms) => terms
                .iter()
                .filter(|k| k.time > r)
                .map(|k| (k.time - r).sqrt())
                .collect(),
            Repr::Custom { .. } => Vec::new(),
        }
    }

    /// `sum_k c_k P_k`; stays in kernel form when every part is a kernel profile.
    pub fn linear_combination(parts: &[(f64, &ProfilePair)]) -> ProfilePair {
        if parts.iter().all(|(_, p)| p.kernel_terms().is_some()) {
            let terms = parts
                .iter()
                .flat_map(|(c, p)| {
                    p.kernel_terms().unwrap().iter().map(move |k| KernelTerm {
                        weight: c * k.weight,
                        time: k.time,
                    })
                })
                .collect();
            return ProfilePair::from_kernels(terms);
        }
        let owned: Vec<(f64, ProfilePair)> = parts.iter().map(|(c, p)| (*c, (*p).clone())).collect();
        let owned = Arc::new(owned);
        let (a, b) = (owned.clone(), owned.clone());
        let horizon = owned.iter().map(|(_, p)| p.horizon()).fold(0.0, f64::max);
        let extent = owned.iter().map(|(_, p)| p.extent()).fold(0.0, f64::max);
        let mut space_breaks: Vec<f64> = owned.iter().flat_map(|(_, p)| p.space_breaks()).collect();
        let mut time_breaks: Vec<f64> = owned.iter().flat_map(|(_, p)| p.time_breaks()).collect();
        sort_dedup(&mut space_breaks);
        sort_dedup(&mut time_breaks);
        ProfilePair::custom(
            move |v| a.iter().map(|(c, p)| c * p.phi(v)).sum(),
            move |r, v| b.iter().map(|(c, p)| c * p.hgrad(r, v)).sum(),
            horizon,
            extent,
            space_breaks,
            time_breaks,
        )
    }

    /// The driving field as a simulator test function, cut off at `radius`.
    pub fn tilt(&self, radius: f64) -> Result<ProfileTilt> {
        let terms = self.kernel_terms().ok_or_else(|| {
            Error::InvalidParams("only kernel profiles have an explicit potential".into())
        })?;
        Ok(ProfileTilt {
            terms: terms.to_vec(),
            radius,
        })
    }

    /// The initial perturbation as a spatial function, cut off at `radius`.
    pub fn initial_perturbation(&self, radius: f64) -> ProfilePhi {
        ProfilePhi {
            profile: self.clone(),
            radius,
        }
    }
}

pub(crate) fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(f64::total_cmp);
    v.dedup();
}

/// `H(r, v) = sum_k w_k k0(t_k - r, v)` truncated at `|v| < radius`.
#[derive(Debug, Clone)]
pub struct ProfileTilt {
    terms: Vec<KernelTerm>,
    radius: f64,
}

impl TestFunction for ProfileTilt {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, t: f64, u: &[f64]) -> f64 {
        let v = u[0];
        if v.abs() >= self.radius {
            return 0.0;
        }
        self.terms.iter().map(|k| k.weight * k0(k.time - t, v)).sum()
    }
    fn grad(&self, t: f64, u: &[f64], out: &mut [f64]) {
        let v = u[0];
        out[0] = if v.abs() >= self.radius {
            0.0
        } else {
            self.terms.iter().map(|k| k.weight * k1(k.time - t, v)).sum()
        };
    }
    fn laplacian(&self, t: f64, u: &[f64]) -> f64 {
        let v = u[0];
        if v.abs() >= self.radius {
            return 0.0;
        }
        self.terms.iter().map(|k| 2.0 * k.weight * p1(k.time - t, v)).sum()
    }
    fn dt(&self, t: f64, u: &[f64]) -> f64 {
        let v = u[0];
        if v.abs() >= self.radius {
            return 0.0;
        }
        self.terms.iter().map(|k| -k.weight * p1(k.time - t, v)).sum()
    }
    fn support_radius(&self) -> f64 {
        self.radius
    }
    fn grad_bound(&self) -> f64 {
        // |k1| <= 1
        self.terms.iter().map(|k| k.weight.abs()).sum()
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// `phi` of a profile truncated at `|v| < radius`.
#[derive(Debug, Clone)]
pub struct ProfilePhi {
    profile: ProfilePair,
    radius: f64,
}

impl SpatialFn for ProfilePhi {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, u: &[f64]) -> f64 {
        if u[0].abs() >= self.radius {
            0.0
        } else {
            self.profile.phi(u[0])
        }
    }
    fn support_radius(&self) -> f64 {
        self.radius
    }
}

/// Optimal `(phi, H)` for the single constraint `int_0^t mu(s, 0) ds = alpha`:
/// `phi = c0 k0(t, .)` and `d_v H(r, .) = c0 k1(t - r, .)` for `r < t`.
pub fn optimal_profile(t: f64, alpha: f64, rho: f64) -> Result<ProfilePair> {
    let weight = c0(t, alpha, rho)?;
    let mut p = ProfilePair::from_kernels(vec![KernelTerm { weight, time: t }]);
    p.meta = ProfileMeta {
        times: vec![t],
        alphas: vec![alpha],
        coefficients: vec![alpha],
    };
    Ok(p)
}

/// Superposition `sum_i beta_i (phi^{t_i,1}, H^{t_i,1})` with `beta = D^{-1} A^{-1} alpha`,
/// `D = diag(t_j^{-3/2})`, meeting all constraints `int_0^{t_i} mu(s,0) ds = alpha_i`.
pub fn minimizer_multi(alpha: &[f64], times: &[f64], rho: f64) -> Result<ProfilePair> {
    if alpha.len() != times.len() || times.is_empty() {
        return Err(Error::InvalidParams("alpha and times must have equal nonzero length".into()));
    }
    let y = solve_cov(times, alpha)?;
    let beta: Vec<f64> = y.iter().zip(times).map(|(y, t)| y * t.powf(1.5)).collect();
    let terms = beta
        .iter()
        .zip(times)
        .map(|(&b, &t)| {
            Ok(KernelTerm {
                weight: b * c0(t, 1.0, rho)?,
                time: t,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut p = ProfilePair::from_kernels(terms);
    p.meta = ProfileMeta {
        times: times.to_vec(),
        alphas: alpha.to_vec(),
        coefficients: beta,
    };
    Ok(p)
}
