//! Configured ensembles that tie the simulator to the rate-theory predictions.

pub mod config;
pub mod run;
pub mod stats;

pub use config::{ExperimentKind, ExperimentOptions, ExperimentSpec};
pub use run::{execute, rate_checks, run, MdpSummary, NamedCheck, ReplicaTable, RunOutput, RunReport, BUILD_ID};
pub use stats::{compare, Comparison, Estimate, Moments, Prediction, SeriesStats, SummaryStats, Tolerance};
