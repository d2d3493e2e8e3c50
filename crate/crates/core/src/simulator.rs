//! Exact continuous-time simulation of the exclusion dynamics by uniformization.
//!
//! A global Poisson clock rings at `(#directed bonds) * dominating rate`; each
//! ring picks a directed bond uniformly, is rejected if the move is blocked,
//! and is otherwise accepted with probability `rate / dominating rate`. The
//! acceptance uniform is only drawn when that ratio is below one.

use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{sample_perturbed, Configuration, Lattice, MAX_DIM};
use crate::params::ScalingParams;
use crate::rng::dynamics_rng;
use crate::test_fn::{SpatialFn, TestFunction};

/// One accepted particle move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    /// Site the particle left.
    pub site: usize,
    /// `+(axis+1)` for a move along `+e_axis`, `-(axis+1)` along `-e_axis`.
    pub direction: i8,
}

impl JumpEvent {
    pub fn axis(&self) -> usize {
        (self.direction.unsigned_abs() - 1) as usize
    }

    pub fn forward(&self) -> bool {
        self.direction > 0
    }

    pub fn target(&self, lattice: &Lattice) -> usize {
        lattice.neighbor(self.site, self.axis(), self.forward())
    }
}

/// Observable values on a fixed time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub horizon: f64,
    pub initial: Configuration,
    pub jumps: Vec<JumpEvent>,
    pub series: Vec<ObservableSeries>,
    pub final_config: Configuration,
    /// Clock rings, accepted or not.
    pub attempts: u64,
    /// Accepted moves (equals `jumps.len()` when jumps are recorded).
    pub jump_count: u64,
}

impl PathRecord {
    pub fn lattice(&self) -> &Lattice {
        self.initial.lattice()
    }

    /// Re-applies the jump list to the initial configuration.
    pub fn replay(&self) -> Result<Configuration> {
        let mut c = self.initial.clone();
        let lattice = *c.lattice();
        for j in &self.jumps {
            let to = j.target(&lattice);
            if !c.get(j.site) || c.get(to) {
                return Err(Error::LatticeMismatch(format!(
                    "jump at t={} from {} to {} is not a legal move",
                    j.time, j.site, to
                )));
            }
            c.move_particle(j.site, to);
        }
        Ok(c)
    }
}

/// Hooks into a running simulation.
///
/// `jump` is called before the configuration changes; `checkpoint` is called
/// for every grid time with the exact state at that time.
pub trait Observer {
    fn grid(&self) -> &[f64];
    fn start(&mut self, _config: &Configuration) {}
    fn jump(&mut self, _time: f64, _from: usize, _to: usize, _before: &Configuration) {}
    fn checkpoint(&mut self, index: usize, time: f64, config: &Configuration);
    fn finish(&mut self, _time: f64, _config: &Configuration) {}
    fn series(&self) -> Vec<ObservableSeries> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub record_jumps: bool,
    /// Recount occupied sites after every jump and panic on a mismatch.
    pub check_invariants: bool,
    /// Accumulate the exponential weight during tilted runs. Turning it off
    /// leaves `TiltAccumulator::log_mart` as NaN and is much faster.
    pub track_weight: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            record_jumps: true,
            check_invariants: false,
            track_weight: true,
        }
    }
}

/// Rate of a candidate move relative to the dominating rate.
trait RateModel {
    fn dominating(&self) -> f64;
    fn ratio(&self, t: f64, from: usize, to: usize, forward: bool) -> Result<f64>;
    fn observe_jump(&mut self, _t: f64, _from: usize, _to: usize, _before: &Configuration) {}
    fn checkpoint(&mut self, _t: f64, _config: &Configuration) {}
}

struct BaseRates {
    forward: f64,
    backward_ratio: f64,
}

impl BaseRates {
    fn new(params: &ScalingParams) -> Self {
        let forward = params.forward_rate();
        Self {
            forward,
            backward_ratio: params.backward_rate() / forward,
        }
    }
}

impl RateModel for BaseRates {
    fn dominating(&self) -> f64 {
        self.forward
    }

    #[inline]
    fn ratio(&self, _t: f64, _from: usize, _to: usize, forward: bool) -> Result<f64> {
        Ok(if forward { 1.0 } else { self.backward_ratio })
    }
}

fn run<M: RateModel>(
    params: &ScalingParams,
    config0: Configuration,
    model: &mut M,
    observers: &mut [&mut dyn Observer],
    rng: &mut ChaCha8Rng,
    opts: &SimOptions,
) -> Result<PathRecord> {
    let lattice = Lattice::from_params(params);
    if *config0.lattice() != lattice {
        return Err(Error::LatticeMismatch(format!(
            "configuration lattice {:?} but parameters give {:?}",
            config0.lattice(),
            lattice
        )));
    }
    let horizon = params.horizon;
    let d = lattice.d;
    let directed = 2 * d * lattice.num_sites();
    let clock = directed as f64 * model.dominating();
    let initial = config0.clone();
    let mut config = config0;
    let count0 = config.particle_count();
    let mut next_grid: Vec<usize> = vec![0; observers.len()];
    for o in observers.iter_mut() {
        o.start(&config);
    }

    let mut jumps = Vec::new();
    let (mut attempts, mut jump_count) = (0u64, 0u64);
    let mut t = 0.0;
    loop {
        let e: f64 = rng.sample(Exp1);
        t += e / clock;
        let t_event = t;
        let stop = t_event > horizon;
        let deliver_until = if stop { horizon } else { t_event };
        for (o, k) in observers.iter_mut().zip(next_grid.iter_mut()) {
            while *k < o.grid().len() && (o.grid()[*k] < deliver_until || (stop && o.grid()[*k] <= horizon)) {
                let g = o.grid()[*k];
                o.checkpoint(*k, g, &config);
                *k += 1;
            }
        }
        if stop {
            break;
        }
        attempts += 1;
        let pick = rng.random_range(0..directed);
        let from = pick / (2 * d);
        let k = pick % (2 * d);
        let axis = k >> 1;
        let forward = k & 1 == 0;
        if !config.get(from) {
            continue;
        }
        let to = lattice.neighbor(from, axis, forward);
        if config.get(to) {
            continue;
        }
        let r = model.ratio(t_event, from, to, forward)?;
        if r < 1.0 {
            let u: f64 = rng.random();
            if u >= r {
                continue;
            }
        }
        for o in observers.iter_mut() {
            o.jump(t_event, from, to, &config);
        }
        model.observe_jump(t_event, from, to, &config);
        config.move_particle(from, to);
        jump_count += 1;
        if opts.check_invariants {
            assert_eq!(config.count_bits(), count0, "particle number changed at t={t_event}");
            assert_eq!(config.particle_count(), count0);
        }
        if opts.record_jumps {
            let dir = (axis as i8 + 1) * if forward { 1 } else { -1 };
            jumps.push(JumpEvent {
                time: t_event,
                site: from,
                direction: dir,
            });
        }
    }
    model.checkpoint(horizon, &config);
    for o in observers.iter_mut() {
        o.finish(horizon, &config);
    }
    let series = observers.iter().flat_map(|o| o.series()).collect();
    Ok(PathRecord {
        horizon,
        initial,
        jumps,
        series,
        final_config: config,
        attempts,
        jump_count,
    })
}

/// Base dynamics on `[0, T]` from `config0`.
pub fn simulate(
    params: &ScalingParams,
    config0: Configuration,
    observers: &mut [&mut dyn Observer],
    seed: u64,
) -> Result<PathRecord> {
    simulate_with(params, config0, observers, seed, &SimOptions::default())
}

pub fn simulate_with(
    params: &ScalingParams,
    config0: Configuration,
    observers: &mut [&mut dyn Observer],
    seed: u64,
    opts: &SimOptions,
) -> Result<PathRecord> {
    let mut model = BaseRates::new(params);
    run(params, config0, &mut model, observers, &mut dynamics_rng(seed), opts)
}

/// Running log of the exponential martingale along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltAccumulator {
    pub log_mart: f64,
    pub last_update_time: f64,
}

impl Default for TiltAccumulator {
    fn default() -> Self {
        Self {
            log_mart: 0.0,
            last_update_time: 0.0,
        }
    }
}

struct TiltedRates<'a> {
    base: BaseRates,
    dominating: f64,
    kappa: f64,
    h: &'a dyn TestFunction,
    frame: crate::bonds::Frame,
    mart: Option<crate::martingale::MartingaleTracker<'a>>,
}

impl TiltedRates<'_> {
    #[inline]
    fn h_at(&self, t: f64, x: usize) -> f64 {
        let mut pos = [0.0; MAX_DIM];
        self.frame.position(x, t, &mut pos);
        self.h.value(t, &pos[..self.frame.lattice.d])
    }
}

impl RateModel for TiltedRates<'_> {
    fn dominating(&self) -> f64 {
        self.dominating
    }

    #[inline]
    fn ratio(&self, t: f64, from: usize, to: usize, forward: bool) -> Result<f64> {
        let base = if forward {
            self.base.forward
        } else {
            self.base.forward * self.base.backward_ratio
        };
        let dh = self.h_at(t, to) - self.h_at(t, from);
        let rate = base * (self.kappa * dh).exp();
        let r = rate / self.dominating;
        if r > 1.0 {
            return Err(Error::ThinningBound {
                time: t,
                site: from,
                rate,
                bound: self.dominating,
            });
        }
        Ok(r)
    }

    fn observe_jump(&mut self, t: f64, from: usize, to: usize, before: &Configuration) {
        if let Some(m) = self.mart.as_mut() {
            m.jump(t, from, to, before);
        }
    }

    fn checkpoint(&mut self, t: f64, config: &Configuration) {
        if let Some(m) = self.mart.as_mut() {
            m.flush(config, t);
        }
    }
}

/// Dynamics under the tilted generator, started from the perturbed product measure.
pub fn simulate_tilted(
    params: &ScalingParams,
    h: &dyn TestFunction,
    phi: &dyn SpatialFn,
    seed: u64,
) -> Result<(PathRecord, TiltAccumulator)> {
    simulate_tilted_with(params, h, phi, &mut [], seed, &SimOptions::default())
}

pub fn simulate_tilted_with(
    params: &ScalingParams,
    h: &dyn TestFunction,
    phi: &dyn SpatialFn,
    observers: &mut [&mut dyn Observer],
    seed: u64,
    opts: &SimOptions,
) -> Result<(PathRecord, TiltAccumulator)> {
    crate::lattice::check_support(params, h.support_radius())?;
    let config0 = sample_perturbed(params, phi, seed)?;
    let base = BaseRates::new(params);
    let kappa = params.kappa();
    let dominating = base.forward * (2.0 * kappa * h.grad_bound() / params.n as f64).exp();
    let frame = crate::martingale::frame_of(params);
    let mut model = TiltedRates {
        base,
        dominating,
        kappa,
        h,
        frame,
        mart: opts
            .track_weight
            .then(|| crate::martingale::MartingaleTracker::new(params, h)),
    };
    let path = run(params, config0, &mut model, observers, &mut dynamics_rng(seed), opts)?;
    let acc = TiltAccumulator {
        log_mart: model.mart.as_ref().map_or(f64::NAN, |m| m.log_value()),
        last_update_time: params.horizon,
    };
    Ok((path, acc))
}

/// Writes the jump list as little-endian `(f64 time, u64 site, i8 direction)` records.
pub fn write_jump_log<W: Write>(path: &PathRecord, mut out: W) -> Result<()> {
    for j in &path.jumps {
        out.write_all(&j.time.to_le_bytes())?;
        out.write_all(&(j.site as u64).to_le_bytes())?;
        out.write_all(&j.direction.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jump_log<R: Read>(mut input: R) -> Result<Vec<JumpEvent>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() % 17 != 0 {
        return Err(Error::LatticeMismatch("truncated jump log".into()));
    }
    Ok(bytes
        .chunks_exact(17)
        .map(|c| JumpEvent {
            time: f64::from_le_bytes(c[0..8].try_into().unwrap()),
            site: u64::from_le_bytes(c[8..16].try_into().unwrap()) as usize,
            direction: c[16] as i8,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::sample_bernoulli;

    fn params(alpha: f64, rho: f64) -> ScalingParams {
        ScalingParams::new(8, 1, alpha, 1.0, rho, 0.75, 0.5, 4).unwrap()
    }

    #[test]
    fn full_lattice_is_frozen() {
        let p = params(0.0, 0.5);
        let full = Configuration::full(Lattice::from_params(&p));
        let path = simulate(&p, full.clone(), &mut [], 3).unwrap();
        assert!(path.jumps.is_empty());
        assert!(path.attempts > 0);
        assert_eq!(path.final_config, full);
    }

    #[test]
    fn replay_reproduces_final_state() {
        let p = params(1.0, 0.3);
        let c0 = sample_bernoulli(&p, 9);
        let path = simulate(&p, c0, &mut [], 9).unwrap();
        assert!(!path.jumps.is_empty());
        assert_eq!(path.replay().unwrap(), path.final_config);
        assert!(path.jumps.windows(2).all(|w| w[0].time < w[1].time));
    }

    #[test]
    fn same_seed_same_path() {
        let p = params(1.0, 0.3);
        let a = simulate(&p, sample_bernoulli(&p, 4), &mut [], 4).unwrap();
        let b = simulate(&p, sample_bernoulli(&p, 4), &mut [], 4).unwrap();
        assert_eq!(a, b);
        let c = simulate(&p, sample_bernoulli(&p, 4), &mut [], 5).unwrap();
        assert_ne!(a.jumps, c.jumps);
    }

    #[test]
    fn lattice_mismatch_rejected() {
        let p = params(0.0, 0.5);
        let wrong = Configuration::empty(Lattice::new(1, 7));
        assert!(simulate(&p, wrong, &mut [], 1).is_err());
    }

    #[test]
    fn jump_log_round_trip() {
        let p = params(1.0, 0.5);
        let path = simulate(&p, sample_bernoulli(&p, 2), &mut [], 2).unwrap();
        let mut buf = Vec::new();
        write_jump_log(&path, &mut buf).unwrap();
        assert_eq!(buf.len(), 17 * path.jumps.len());
        assert_eq!(read_jump_log(&buf[..]).unwrap(), path.jumps);
    }
}
