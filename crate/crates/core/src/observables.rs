//! Path functionals: fluctuation fields, additive functionals of local
//! functions, the quadratic field `Q^n_s(H)` and the initial relative entropy.

use serde::{Deserialize, Serialize};

use crate::bonds::{BondIntegral, BondIntegrand, BondState, Frame};
use crate::error::{Error, Result};
use crate::lattice::{check_support, perturbed_marginals, Configuration, Lattice, MAX_DIM};
use crate::martingale::frame_of;
use crate::params::ScalingParams;
use crate::simulator::{ObservableSeries, Observer, PathRecord};
use crate::test_fn::{SpatialFn, TestFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub time: f64,
    pub value: f64,
}

/// `<mu^n_t, H> = (1/a_n) sum_x (eta_x - rho) H_t((x - v_n t m)/n)`.
pub fn fluctuation_field(
    config: &Configuration,
    h: &dyn TestFunction,
    t: f64,
    params: &ScalingParams,
) -> Result<f64> {
    check_support(params, h.support_radius())?;
    Ok(field_unchecked(config, h, t, params, &frame_of(params)))
}

fn field_unchecked(
    config: &Configuration,
    h: &dyn TestFunction,
    t: f64,
    params: &ScalingParams,
    frame: &Frame,
) -> f64 {
    if h.is_zero() {
        return 0.0;
    }
    let d = frame.lattice.d;
    let mut pos = [0.0; MAX_DIM];
    let mut total = 0.0;
    for x in 0..config.num_sites() {
        frame.position(x, t, &mut pos);
        let v = h.value(t, &pos[..d]);
        if v != 0.0 {
            total += (config.eta(x) - params.rho) * v;
        }
    }
    total / params.a_n()
}

/// Samples `<mu^n_t, H>` on a grid.
pub struct FieldObserver<'a> {
    h: &'a dyn TestFunction,
    params: ScalingParams,
    frame: Frame,
    grid: Vec<f64>,
    values: Vec<f64>,
    name: String,
}

impl<'a> FieldObserver<'a> {
    pub fn new(params: &ScalingParams, h: &'a dyn TestFunction, grid: Vec<f64>) -> Result<Self> {
        check_support(params, h.support_radius())?;
        Ok(Self {
            h,
            params: *params,
            frame: frame_of(params),
            values: vec![f64::NAN; grid.len()],
            grid,
            name: "field".into(),
        })
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn samples(&self) -> Vec<FieldSample> {
        self.grid
            .iter()
            .zip(&self.values)
            .map(|(&time, &value)| FieldSample { time, value })
            .collect()
    }
}

impl Observer for FieldObserver<'_> {
    fn grid(&self) -> &[f64] {
        &self.grid
    }
    fn checkpoint(&mut self, index: usize, time: f64, config: &Configuration) {
        self.values[index] = field_unchecked(config, self.h, time, &self.params, &self.frame);
    }
    fn series(&self) -> Vec<ObservableSeries> {
        vec![ObservableSeries {
            name: self.name.clone(),
            times: self.grid.clone(),
            values: self.values.clone(),
        }]
    }
}

type LocalEval = dyn Fn(&[bool]) -> f64 + Send + Sync;

/// A function of the occupation variables in a finite window of sites.
pub struct LocalFunction {
    offsets: Vec<[i64; MAX_DIM]>,
    f: Box<LocalEval>,
}

impl LocalFunction {
    pub const MAX_WINDOW: usize = 20;

    pub fn new(offsets: Vec<[i64; MAX_DIM]>, f: impl Fn(&[bool]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            offsets,
            f: Box::new(f),
        }
    }

    /// Sites `0, e_1, 2 e_1, ...` along the first axis.
    pub fn on_line(width: usize, f: impl Fn(&[bool]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new((0..width as i64).map(|k| [k, 0, 0]).collect(), f)
    }

    /// `eta_0`.
    pub fn occupation() -> Self {
        Self::on_line(1, |e| e[0] as u8 as f64)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Vec::new(), move |_| c)
    }

    pub fn window_size(&self) -> usize {
        self.offsets.len()
    }

    pub fn eval(&self, occupancy: &[bool]) -> f64 {
        (self.f)(occupancy)
    }

    /// Lattice sites of the window anchored at the origin.
    pub fn sites(&self, lattice: &Lattice) -> Result<Vec<usize>> {
        let size = self.offsets.len();
        if size > lattice.num_sites() {
            return Err(Error::WindowTooLarge {
                size,
                reason: format!("lattice has only {} sites", lattice.num_sites()),
            });
        }
        let side = lattice.side as i64;
        let sites: Vec<usize> = self
            .offsets
            .iter()
            .map(|o| {
                let c: Vec<usize> = o[..lattice.d].iter().map(|&k| k.rem_euclid(side) as usize).collect();
                lattice.index(&c)
            })
            .collect();
        let mut sorted = sites.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != size {
            return Err(Error::WindowTooLarge {
                size,
                reason: "window wraps onto itself".into(),
            });
        }
        Ok(sites)
    }

    fn eval_config(&self, config: &Configuration, sites: &[usize], buf: &mut Vec<bool>) -> f64 {
        buf.clear();
        buf.extend(sites.iter().map(|&x| config.get(x)));
        self.eval(buf)
    }
}

/// `E_{nu_rho}[f]` by enumerating all `2^w` window states.
pub fn ftilde(f: &LocalFunction, rho: f64) -> Result<f64> {
    let w = f.window_size();
    if w > LocalFunction::MAX_WINDOW {
        return Err(Error::WindowTooLarge {
            size: w,
            reason: format!("exact enumeration limited to {} sites", LocalFunction::MAX_WINDOW),
        });
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::DensityOutOfRange(rho));
    }
    let mut state = vec![false; w];
    let mut total = 0.0;
    for mask in 0u32..(1u32 << w) {
        let mut weight = 1.0;
        for (k, s) in state.iter_mut().enumerate() {
            *s = (mask >> k) & 1 == 1;
            weight *= if *s { rho } else { 1.0 - rho };
        }
        if weight > 0.0 {
            total += weight * f.eval(&state);
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationTrajectory {
    pub times: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// Exact running integral of `f(eta(s)) - ftilde(rho)`, scaled by `n / a_n`.
pub struct OccupationObserver<'a> {
    f: &'a LocalFunction,
    sites: Vec<usize>,
    in_window: Vec<bool>,
    centre: f64,
    scale: f64,
    current: f64,
    last: f64,
    integral: f64,
    buf: Vec<bool>,
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl<'a> OccupationObserver<'a> {
    pub fn new(params: &ScalingParams, f: &'a LocalFunction, grid: Vec<f64>) -> Result<Self> {
        let lattice = Lattice::from_params(params);
        let sites = f.sites(&lattice)?;
        let mut in_window = vec![false; lattice.num_sites()];
        for &x in &sites {
            in_window[x] = true;
        }
        Ok(Self {
            f,
            sites,
            in_window,
            centre: ftilde(f, params.rho)?,
            scale: params.n as f64 / params.a_n(),
            current: 0.0,
            last: 0.0,
            integral: 0.0,
            buf: Vec::new(),
            values: vec![f64::NAN; grid.len()],
            grid,
        })
    }

    fn advance(&mut self, t: f64) {
        self.integral += (t - self.last) * (self.current - self.centre);
        self.last = t;
    }

    pub fn gamma(&self) -> &[f64] {
        &self.values
    }

    pub fn trajectory(&self) -> OccupationTrajectory {
        OccupationTrajectory {
            times: self.grid.clone(),
            gamma: self.values.clone(),
        }
    }
}

impl Observer for OccupationObserver<'_> {
    fn grid(&self) -> &[f64] {
        &self.grid
    }
    fn start(&mut self, config: &Configuration) {
        self.current = self.f.eval_config(config, &self.sites, &mut self.buf);
        self.last = 0.0;
        self.integral = 0.0;
    }
    fn jump(&mut self, time: f64, from: usize, to: usize, before: &Configuration) {
        if !(self.in_window[from] || self.in_window[to]) {
            return;
        }
        self.advance(time);
        self.buf.clear();
        for &x in &self.sites {
            let occupied = if x == from {
                false
            } else if x == to {
                true
            } else {
                before.get(x)
            };
            self.buf.push(occupied);
        }
        self.current = self.f.eval(&self.buf);
    }
    fn checkpoint(&mut self, index: usize, time: f64, _config: &Configuration) {
        self.advance(time);
        self.values[index] = self.scale * self.integral;
    }
    fn series(&self) -> Vec<ObservableSeries> {
        vec![ObservableSeries {
            name: "gamma".into(),
            times: self.grid.clone(),
            values: self.values.clone(),
        }]
    }
}

/// Replays a recorded path and integrates the additive functional exactly.
pub fn occupation_time(
    path: &PathRecord,
    f: &LocalFunction,
    params: &ScalingParams,
    grid: &[f64],
) -> Result<OccupationTrajectory> {
    let lattice = Lattice::from_params(params);
    if *path.lattice() != lattice {
        return Err(Error::LatticeMismatch("path and parameters disagree".into()));
    }
    let mut obs = OccupationObserver::new(params, f, grid.to_vec())?;
    let mut config = path.initial.clone();
    obs.start(&config);
    let mut k = 0;
    for j in &path.jumps {
        while k < grid.len() && grid[k] < j.time {
            obs.checkpoint(k, grid[k], &config);
            k += 1;
        }
        let to = j.target(&lattice);
        obs.jump(j.time, j.site, to, &config);
        config.move_particle(j.site, to);
    }
    while k < grid.len() {
        obs.checkpoint(k, grid[k], &config);
        k += 1;
    }
    Ok(obs.trajectory())
}

/// Exact `Var(Gamma(t))` for the symmetric process (`alpha = 0`) in one dimension
/// started from `nu_rho`, with `f = eta_0`.
///
/// By duality `Cov(eta_0(0), eta_s(0)) = chi q_s` with `q_s` the return probability of
/// a random walk jumping at rate `n^2/2` each way on the torus, so
/// `Var = (n/a_n)^2 2 chi int_0^t (t - s) q_s ds`, summed mode by mode.
pub fn ssep_occupation_variance(params: &ScalingParams, t: f64) -> Result<f64> {
    if params.d != 1 {
        return Err(Error::InvalidParams("closed form is for d = 1".into()));
    }
    let side = params.side();
    let n2 = (params.n as f64).powi(2);
    let mut sum = 0.0;
    for k in 0..side {
        let lambda = n2 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / side as f64).cos());
        sum += if lambda * t < 1e-8 {
            0.5 * t * t
        } else {
            t / lambda - (-(-lambda * t).exp_m1()) / (lambda * lambda)
        };
    }
    let scale = params.n as f64 / params.a_n();
    Ok(scale * scale * 2.0 * params.chi() * sum / side as f64)
}

/// How the gradient inside `Q^n_s(H)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gradient {
    /// `d_{u_i} H_s` at the left site of the bond.
    Continuous,
    /// `n [H_s(x + e_i) - H_s(x)]` in the moving frame.
    Discrete,
}

fn q_prefactor(params: &ScalingParams) -> f64 {
    params.alpha * (params.n as f64).powf(1.0 - params.beta) / (params.d as f64 * params.a_n())
}

/// `Q^n_s(H) = alpha n^{1-beta} / (d a_n) sum_{x,i} (eta_x - rho)(eta_{x+e_i} - rho) d_i H_s`.
pub fn q_n_observable(
    config: &Configuration,
    h: &dyn TestFunction,
    s: f64,
    params: &ScalingParams,
    gradient: Gradient,
) -> Result<f64> {
    check_support(params, h.support_radius())?;
    if params.alpha == 0.0 || h.is_zero() {
        return Ok(0.0);
    }
    let frame = frame_of(params);
    let lattice = frame.lattice;
    let d = lattice.d;
    let rho = params.rho;
    let centred = |x: usize| config.eta(x) - rho;
    let mut pos = [0.0; MAX_DIM];
    let mut total = 0.0;
    match gradient {
        Gradient::Continuous => {
            for x in 0..lattice.num_sites() {
                frame.position(x, s, &mut pos);
                for axis in 0..d {
                    let g = h.grad_axis(s, &pos[..d], axis);
                    if g != 0.0 {
                        let y = lattice.neighbor(x, axis, true);
                        total += centred(x) * centred(y) * g;
                    }
                }
            }
        }
        Gradient::Discrete => {
            // summation by parts: sum_x w_x (H_{x+e} - H_x) = sum_x H_x (w_{x-e} - w_x),
            // which vanishes exactly when the weights are constant
            let n = params.n as f64;
            for x in 0..lattice.num_sites() {
                frame.position(x, s, &mut pos);
                let hx = h.value(s, &pos[..d]);
                if hx == 0.0 {
                    continue;
                }
                for axis in 0..d {
                    let y = lattice.neighbor(x, axis, true);
                    let w = lattice.neighbor(x, axis, false);
                    let diff = centred(w) * centred(x) - centred(x) * centred(y);
                    total += n * hx * diff;
                }
            }
        }
    }
    Ok(q_prefactor(params) * total)
}

struct QIntegrand<'a> {
    h: &'a dyn TestFunction,
    frame: Frame,
    rho: f64,
    prefactor: f64,
    gradient: Gradient,
    reach: f64,
}

impl BondIntegrand for QIntegrand<'_> {
    fn active(&self, _state: BondState) -> bool {
        true
    }
    fn reach(&self) -> f64 {
        self.reach
    }
    fn eval(&self, x: usize, axis: usize, state: BondState, s: f64) -> f64 {
        let ex = (state >> 1) as f64 - self.rho;
        let ey = (state & 1) as f64 - self.rho;
        let d = self.frame.lattice.d;
        let mut pos = [0.0; MAX_DIM];
        self.frame.position(x, s, &mut pos);
        let g = match self.gradient {
            Gradient::Continuous => self.h.grad_axis(s, &pos[..d], axis),
            Gradient::Discrete => {
                let hx = self.h.value(s, &pos[..d]);
                let y = self.frame.lattice.neighbor(x, axis, true);
                self.frame.position(y, s, &mut pos);
                self.frame.n as f64 * (self.h.value(s, &pos[..d]) - hx)
            }
        };
        self.prefactor * ex * ey * g
    }
    fn time_independent(&self) -> bool {
        self.h.is_static() && self.frame.velocity == 0.0
    }
}

/// Running `int_0^t Q^n_s(H) ds`, integrated exactly between jumps.
pub struct QIntegralObserver<'a> {
    acc: BondIntegral<QIntegrand<'a>>,
    grid: Vec<f64>,
    values: Vec<f64>,
    skip: bool,
}

impl<'a> QIntegralObserver<'a> {
    pub fn new(
        params: &ScalingParams,
        h: &'a dyn TestFunction,
        gradient: Gradient,
        grid: Vec<f64>,
    ) -> Result<Self> {
        check_support(params, h.support_radius())?;
        let frame = frame_of(params);
        let integrand = QIntegrand {
            h,
            frame,
            rho: params.rho,
            prefactor: q_prefactor(params),
            gradient,
            reach: h.support_radius() + 2.0 / params.n as f64,
        };
        Ok(Self {
            acc: BondIntegral::new(integrand, frame, params.horizon),
            values: vec![f64::NAN; grid.len()],
            grid,
            skip: params.alpha == 0.0 || h.is_zero(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `max_k |int_0^{t_k} Q|` over the grid.
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn terminal(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

impl Observer for QIntegralObserver<'_> {
    fn grid(&self) -> &[f64] {
        &self.grid
    }
    fn jump(&mut self, time: f64, from: usize, to: usize, before: &Configuration) {
        if !self.skip {
            self.acc.before_jump(from, to, before, time);
        }
    }
    fn checkpoint(&mut self, index: usize, time: f64, config: &Configuration) {
        if !self.skip {
            self.acc.flush(config, time);
        }
        self.values[index] = self.acc.total();
    }
    fn series(&self) -> Vec<ObservableSeries> {
        vec![ObservableSeries {
            name: "q_integral".into(),
            times: self.grid.clone(),
            values: self.values.clone(),
        }]
    }
}

/// Exact entropy of the perturbed product measure relative to `nu_rho`.
pub fn relative_entropy_initial(phi: &dyn SpatialFn, params: &ScalingParams) -> Result<f64> {
    let rho = params.rho;
    let marginals = perturbed_marginals(params, phi)?;
    Ok(marginals.iter().map(|&p| bernoulli_kl(p, rho)).sum())
}

/// `KL(Bernoulli(p) | Bernoulli(q))` with `0 log 0 = 0`.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

/// Time-averaged density of a block of sites, plus its value on a grid.
pub struct BlockDensityObserver {
    in_block: Vec<bool>,
    size: f64,
    count: f64,
    last: f64,
    integral: f64,
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl BlockDensityObserver {
    pub fn new(lattice: &Lattice, block: &[usize], grid: Vec<f64>) -> Self {
        let mut in_block = vec![false; lattice.num_sites()];
        for &x in block {
            in_block[x] = true;
        }
        Self {
            in_block,
            size: block.len() as f64,
            count: 0.0,
            last: 0.0,
            integral: 0.0,
            values: vec![f64::NAN; grid.len()],
            grid,
        }
    }

    /// `(1/T) int_0^T (block density) dt`, valid after the run.
    pub fn time_average(&self) -> f64 {
        self.integral / (self.last * self.size)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn advance(&mut self, t: f64) {
        self.integral += (t - self.last) * self.count;
        self.last = t;
    }
}

impl Observer for BlockDensityObserver {
    fn grid(&self) -> &[f64] {
        &self.grid
    }
    fn start(&mut self, config: &Configuration) {
        self.count = (0..config.num_sites())
            .filter(|&x| self.in_block[x] && config.get(x))
            .count() as f64;
    }
    fn jump(&mut self, time: f64, from: usize, to: usize, _before: &Configuration) {
        let delta = self.in_block[to] as i32 - self.in_block[from] as i32;
        if delta != 0 {
            self.advance(time);
            self.count += delta as f64;
        }
    }
    fn checkpoint(&mut self, index: usize, _time: f64, _config: &Configuration) {
        self.values[index] = self.count / self.size;
    }
    fn finish(&mut self, time: f64, _config: &Configuration) {
        self.advance(time);
    }
    fn series(&self) -> Vec<ObservableSeries> {
        vec![ObservableSeries {
            name: "block_density".into(),
            times: self.grid.clone(),
            values: self.values.clone(),
        }]
    }
}

/// Net number of particles crossing the bond `x -> x + e_axis`.
pub struct BondCurrentObserver {
    from: usize,
    to: usize,
    net: i64,
    grid: Vec<f64>,
}

impl BondCurrentObserver {
    pub fn new(lattice: &Lattice, x: usize, axis: usize) -> Self {
        Self {
            from: x,
            to: lattice.neighbor(x, axis, true),
            net: 0,
            grid: Vec::new(),
        }
    }

    pub fn net(&self) -> i64 {
        self.net
    }
}

impl Observer for BondCurrentObserver {
    fn grid(&self) -> &[f64] {
        &self.grid
    }
    fn jump(&mut self, _time: f64, from: usize, to: usize, _before: &Configuration) {
        if from == self.from && to == self.to {
            self.net += 1;
        } else if from == self.to && to == self.from {
            self.net -= 1;
        }
    }
    fn checkpoint(&mut self, _index: usize, _time: f64, _config: &Configuration) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_fn::{Bump, Zero};

    fn params(alpha: f64, rho: f64) -> ScalingParams {
        ScalingParams::new(16, 1, alpha, 1.0, rho, 0.75, 1.0, 4).unwrap()
    }

    #[test]
    fn ftilde_examples() {
        let rho = 0.3;
        assert!((ftilde(&LocalFunction::occupation(), rho).unwrap() - rho).abs() < 1e-15);
        let prod = LocalFunction::on_line(2, |e| (e[0] && e[1]) as u8 as f64);
        assert!((ftilde(&prod, rho).unwrap() - rho * rho).abs() < 1e-15);
        let exch = LocalFunction::on_line(2, |e| (e[0] && !e[1]) as u8 as f64);
        assert!((ftilde(&exch, rho).unwrap() - rho * (1.0 - rho)).abs() < 1e-15);
        assert!(ftilde(&LocalFunction::on_line(21, |_| 0.0), rho).is_err());
        assert_eq!(ftilde(&LocalFunction::constant(2.5), rho).unwrap(), 2.5);
    }

    #[test]
    fn field_of_full_configuration() {
        let p = params(0.0, 0.3);
        let l = Lattice::from_params(&p);
        let h = Bump::new(1, 1.0, 1.0);
        let full = Configuration::full(l);
        let direct: f64 = (0..l.num_sites())
            .map(|x| {
                let mut pos = [0.0; MAX_DIM];
                crate::lattice::site_position(&l, p.n, x, 0.0, &mut pos);
                SpatialFn::value(&h, &pos[..1])
            })
            .sum::<f64>()
            * (1.0 - p.rho)
            / p.a_n();
        let v = fluctuation_field(&full, &h, 0.0, &p).unwrap();
        assert!((v - direct).abs() < 1e-12);
        assert_eq!(fluctuation_field(&full, &Zero::new(1), 0.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn discrete_q_vanishes_on_constant_configurations() {
        let p = params(1.0, 0.3);
        let l = Lattice::from_params(&p);
        let h = Bump::new(1, 1.2, 1.0);
        for c in [Configuration::full(l), Configuration::empty(l)] {
            assert_eq!(q_n_observable(&c, &h, 0.4, &p, Gradient::Discrete).unwrap(), 0.0);
            let cont = q_n_observable(&c, &h, 0.4, &p, Gradient::Continuous).unwrap();
            assert!(cont.abs() < 1e-3);
        }
        let ssep = params(0.0, 0.3);
        let c = Configuration::full(l);
        assert_eq!(q_n_observable(&c, &h, 0.0, &ssep, Gradient::Continuous).unwrap(), 0.0);
    }

    #[test]
    fn entropy_of_single_site_bump() {
        let p = params(0.0, 0.4);
        // a bump narrower than one lattice spacing only touches the origin
        let phi = Bump::new(1, 0.5 / p.n as f64, 2.0);
        let e = relative_entropy_initial(&phi, &p).unwrap();
        let q = p.rho + p.chi() * p.kappa() * 2.0;
        assert!((e - bernoulli_kl(q, p.rho)).abs() < 1e-15);
        assert_eq!(relative_entropy_initial(&Zero::new(1), &p).unwrap(), 0.0);
    }
}
