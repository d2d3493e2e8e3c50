//! The exponential martingale of the field, the Girsanov weight of the
//! tilted measure and the importance-sampled deviation estimator.
//!
//! With `F_s = (a_n/n^d) sum_x (eta_x - rho) H_s(x_s)` the martingale is
//! `exp{F_T - F_0 - int (d_s + L_n) ...}`. Between jumps `F` moves only through
//! `d_s F`, which cancels, so the log telescopes to the sum over jumps of
//! `(a_n/n^d)(H(target) - H(source))` minus the integral of the bond compensator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bonds::{BondIntegral, BondIntegrand, BondState, Frame, STATE_01, STATE_10};
use crate::error::{Error, Result};
use crate::lattice::{perturbed_marginals, sample_bernoulli, Configuration, Lattice, MAX_DIM};
use crate::params::ScalingParams;
use crate::rng::replica_seed;
use crate::simulator::{
    simulate_tilted_with, simulate_with, ObservableSeries, Observer, PathRecord, SimOptions,
};
use crate::test_fn::{SpatialFn, TestFunction};

pub fn frame_of(params: &ScalingParams) -> Frame {
    Frame {
        lattice: Lattice::from_params(params),
        n: params.n,
        velocity: params.drift_velocity(),
    }
}

/// Compensator density of one bond: `sum over possible moves of rate (e^{kappa dH} - 1)`.
pub struct Compensator<'a> {
    h: &'a dyn TestFunction,
    frame: Frame,
    kappa: f64,
    forward: f64,
    backward: f64,
    reach: f64,
}

impl<'a> Compensator<'a> {
    pub fn new(params: &ScalingParams, h: &'a dyn TestFunction) -> Self {
        Self {
            h,
            frame: frame_of(params),
            kappa: params.kappa(),
            forward: params.forward_rate(),
            backward: params.backward_rate(),
            reach: h.support_radius() + 1.5 / params.n as f64,
        }
    }

    #[inline]
    fn h_at(&self, x: usize, s: f64) -> f64 {
        let mut pos = [0.0; MAX_DIM];
        self.frame.position(x, s, &mut pos);
        self.h.value(s, &pos[..self.frame.lattice.d])
    }
}

impl BondIntegrand for Compensator<'_> {
    fn active(&self, state: BondState) -> bool {
        state == STATE_10 || state == STATE_01
    }

    fn reach(&self) -> f64 {
        self.reach
    }

    fn eval(&self, x: usize, axis: usize, state: BondState, s: f64) -> f64 {
        let y = self.frame.lattice.neighbor(x, axis, true);
        let dh = self.h_at(y, s) - self.h_at(x, s);
        if state == STATE_10 {
            self.forward * (self.kappa * dh).exp_m1()
        } else {
            self.backward * (-self.kappa * dh).exp_m1()
        }
    }

    fn time_independent(&self) -> bool {
        self.h.is_static() && self.frame.velocity == 0.0
    }
}

/// Incremental `log M_t(H)`.
pub struct MartingaleTracker<'a> {
    compensator: Option<BondIntegral<Compensator<'a>>>,
    jump_sum: f64,
}

impl<'a> MartingaleTracker<'a> {
    pub fn new(params: &ScalingParams, h: &'a dyn TestFunction) -> Self {
        let compensator = (!h.is_zero()).then(|| {
            BondIntegral::new(Compensator::new(params, h), frame_of(params), params.horizon)
        });
        Self {
            compensator,
            jump_sum: 0.0,
        }
    }

    pub fn start(&mut self) {
        self.jump_sum = 0.0;
    }

    pub fn jump(&mut self, t: f64, from: usize, to: usize, before: &Configuration) {
        if let Some(c) = self.compensator.as_mut() {
            let comp = &c.integrand;
            self.jump_sum += comp.kappa * (comp.h_at(to, t) - comp.h_at(from, t));
            c.before_jump(from, to, before, t);
        }
    }

    pub fn flush(&mut self, config: &Configuration, t: f64) {
        if let Some(c) = self.compensator.as_mut() {
            c.flush(config, t);
        }
    }

    pub fn log_value(&self) -> f64 {
        match &self.compensator {
            Some(c) => self.jump_sum - c.total(),
            None => 0.0,
        }
    }
}

/// Exact `log M_T(H)` for a recorded base-dynamics path.
pub fn log_martingale(path: &PathRecord, h: &dyn TestFunction, params: &ScalingParams) -> Result<f64> {
    let lattice = Lattice::from_params(params);
    if *path.lattice() != lattice {
        return Err(Error::LatticeMismatch(format!(
            "path lattice {:?} but parameters give {:?}",
            path.lattice(),
            lattice
        )));
    }
    if path.jumps.len() as u64 != path.jump_count {
        return Err(Error::LatticeMismatch(
            "path was simulated without recording its jumps".into(),
        ));
    }
    crate::lattice::check_support(params, h.support_radius())?;
    let mut tracker = MartingaleTracker::new(params, h);
    let mut config = path.initial.clone();
    for j in &path.jumps {
        let to = j.target(&lattice);
        if !config.get(j.site) || config.get(to) {
            return Err(Error::LatticeMismatch(format!(
                "jump at t={} is illegal for this configuration",
                j.time
            )));
        }
        tracker.jump(j.time, j.site, to, &config);
        config.move_particle(j.site, to);
    }
    tracker.flush(&config, path.horizon);
    Ok(tracker.log_value())
}

/// `log d nu^{phi} / d nu_rho` at a configuration.
pub fn initial_log_density(
    config: &Configuration,
    phi: &dyn SpatialFn,
    params: &ScalingParams,
) -> Result<f64> {
    let marginals = perturbed_marginals(params, phi)?;
    let rho = params.rho;
    Ok(marginals
        .iter()
        .enumerate()
        .map(|(x, &p)| {
            if config.get(x) {
                ((p - rho) / rho).ln_1p()
            } else {
                ((rho - p) / (1.0 - rho)).ln_1p()
            }
        })
        .sum())
}

/// `log dP_{H,phi} / dP_rho` evaluated on a base-dynamics path.
pub fn girsanov_weight(
    path: &PathRecord,
    h: &dyn TestFunction,
    phi: &dyn SpatialFn,
    params: &ScalingParams,
) -> Result<f64> {
    Ok(log_martingale(path, h, params)? + initial_log_density(&path.initial, phi, params)?)
}

/// `log M_t(H)` sampled on a grid while the base dynamics runs.
pub struct MartingaleObserver<'a> {
    tracker: MartingaleTracker<'a>,
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl<'a> MartingaleObserver<'a> {
    pub fn new(params: &ScalingParams, h: &'a dyn TestFunction, grid: Vec<f64>) -> Self {
        Self {
            tracker: MartingaleTracker::new(params, h),
            values: vec![f64::NAN; grid.len()],
            grid,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn final_value(&self) -> f64 {
        self.tracker.log_value()
    }
}

impl Observer for MartingaleObserver<'_> {
    fn grid(&self) -> &[f64] {
        &self.grid
    }
    fn jump(&mut self, time: f64, from: usize, to: usize, before: &Configuration) {
        self.tracker.jump(time, from, to, before);
    }
    fn checkpoint(&mut self, index: usize, time: f64, config: &Configuration) {
        self.tracker.flush(config, time);
        self.values[index] = self.tracker.log_value();
    }
    fn finish(&mut self, time: f64, config: &Configuration) {
        self.tracker.flush(config, time);
    }
    fn series(&self) -> Vec<ObservableSeries> {
        vec![ObservableSeries {
            name: "log_martingale".into(),
            times: self.grid.clone(),
            values: self.values.clone(),
        }]
    }
}

/// Change of measure used for importance sampling.
#[derive(Clone, Copy)]
pub struct Tilt<'a> {
    pub h: &'a dyn TestFunction,
    pub phi: &'a dyn SpatialFn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpEstimate {
    /// `(n^d / a_n^2) log p`, `-inf` when the event was never hit.
    pub scaled_log_prob: f64,
    pub stderr: f64,
    pub probability: f64,
    pub prob_stderr: f64,
    pub hits: usize,
    pub replicas: usize,
    pub torus_side: usize,
}

/// Monte Carlo estimate of the decay-rate-scaled log probability of `event`.
///
/// With a tilt, paths come from the tilted dynamics and each hit is weighted
/// by `exp(-log dP_{H,phi}/dP_rho)`.
pub fn mdp_estimate<E>(
    event: E,
    params: &ScalingParams,
    tilt: Option<Tilt<'_>>,
    replicas: usize,
    seed: u64,
) -> Result<MdpEstimate>
where
    E: Fn(&PathRecord) -> bool + Sync,
{
    if replicas < 100 {
        return Err(Error::InvalidParams(format!(
            "at least 100 replicas required, got {replicas}"
        )));
    }
    // the event may need the jump log, e.g. to integrate an occupation time
    let opts = SimOptions::default();
    let weights: Vec<(bool, f64)> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| -> Result<(bool, f64)> {
            let s = replica_seed(seed, i);
            match tilt {
                None => {
                    let c0 = sample_bernoulli(params, s);
                    let path = simulate_with(params, c0, &mut [], s, &opts)?;
                    let hit = event(&path);
                    Ok((hit, if hit { 1.0 } else { 0.0 }))
                }
                Some(t) => {
                    let (path, acc) = simulate_tilted_with(params, t.h, t.phi, &mut [], s, &opts)?;
                    let hit = event(&path);
                    if !hit {
                        return Ok((false, 0.0));
                    }
                    let w = acc.log_mart + initial_log_density(&path.initial, t.phi, params)?;
                    Ok((true, (-w).exp()))
                }
            }
        })
        .collect::<Result<_>>()?;
    let hits = weights.iter().filter(|w| w.0).count();
    let n = replicas as f64;
    let mean = weights.iter().map(|w| w.1).sum::<f64>() / n;
    let var = weights.iter().map(|w| (w.1 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let prob_stderr = (var / n).sqrt();
    let speed = params.speed();
    let (scaled_log_prob, stderr) = if hits == 0 || mean <= 0.0 {
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        (mean.ln() / speed, prob_stderr / mean / speed)
    };
    Ok(MdpEstimate {
        scaled_log_prob,
        stderr,
        probability: mean,
        prob_stderr,
        hits,
        replicas,
        torus_side: params.side(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::simulate;
    use crate::test_fn::{Bump, RampedBump, Zero};

    fn params(rho: f64) -> ScalingParams {
        ScalingParams::new(8, 1, 1.0, 1.0, rho, 0.75, 0.3, 4).unwrap()
    }

    #[test]
    fn zero_test_function_gives_zero() {
        let p = params(0.3);
        let path = simulate(&p, sample_bernoulli(&p, 1), &mut [], 1).unwrap();
        assert_eq!(log_martingale(&path, &Zero::new(1), &p).unwrap(), 0.0);
        assert_eq!(girsanov_weight(&path, &Zero::new(1), &Zero::new(1), &p).unwrap(), 0.0);
    }

    #[test]
    fn observer_matches_replay() {
        let p = params(0.3);
        let h = RampedBump::new(Bump::new(1, 1.0, 1.0), 0.5, p.horizon);
        let mut obs = MartingaleObserver::new(&p, &h, vec![0.1, 0.2, 0.3]);
        let path = simulate(&p, sample_bernoulli(&p, 2), &mut [&mut obs], 2).unwrap();
        let replayed = log_martingale(&path, &h, &p).unwrap();
        assert!((obs.final_value() - replayed).abs() < 1e-12);
        assert!((obs.values()[2] - replayed).abs() < 1e-12);
    }

    #[test]
    fn always_true_event_is_zero() {
        let p = params(0.5);
        let est = mdp_estimate(|_| true, &p, None, 100, 3).unwrap();
        assert_eq!(est.scaled_log_prob, 0.0);
        assert_eq!(est.hits, 100);
    }

    #[test]
    fn never_true_event_flags() {
        let p = params(0.5);
        let est = mdp_estimate(|_| false, &p, None, 100, 3).unwrap();
        assert_eq!(est.scaled_log_prob, f64::NEG_INFINITY);
        assert_eq!(est.hits, 0);
        assert!(mdp_estimate(|_| true, &p, None, 50, 3).is_err());
    }
}
