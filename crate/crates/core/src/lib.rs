//! Weakly asymmetric simple exclusion on a periodic lattice: exact simulation,
//! tilted dynamics with Girsanov weights, fluctuation observables and the
//! deterministic rate-function numerics they are compared against.

pub mod bonds;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod martingale;
pub mod observables;
pub mod params;
pub mod quadrature;
pub mod rate;
pub mod rng;
pub mod simulator;
pub mod test_fn;

pub use error::{Error, Result};
pub use lattice::{sample_bernoulli, sample_perturbed, Configuration, Lattice};
pub use params::{a_n, chi, drift_velocity, validate_assumption, AssumptionReport, ScalingParams};
pub use simulator::{simulate, simulate_tilted, JumpEvent, Observer, PathRecord, TiltAccumulator};
pub use test_fn::{SpatialFn, TestFunction};
