//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ScalingParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Stationarity,
    OccupationVariance,
    TiltedHydro,
    MartingaleCheck,
    MdpEstimate,
    VerifyRates,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Stationarity => "stationarity",
            Self::OccupationVariance => "occupation-variance",
            Self::TiltedHydro => "tilted-hydro",
            Self::MartingaleCheck => "martingale-check",
            Self::MdpEstimate => "mdp-estimate",
            Self::VerifyRates => "verify-rates",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidSpec(format!("unknown experiment kind {s:?}")))
    }
}

/// Knobs that only some experiments read. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentOptions {
    /// Number of equally spaced observation times in `[0, T]`, endpoints included.
    pub grid_points: usize,
    /// Sites in the stationarity block, starting at the origin.
    pub block: Option<usize>,
    /// Radius and amplitude of the bump test function.
    pub bump_radius: f64,
    pub bump_amplitude: f64,
    /// Growth rate of the bump in time (martingale check).
    pub bump_slope: f64,
    /// Constraint time and value of the optimal tilt.
    pub target_time: Option<f64>,
    pub target_alpha: f64,
    /// Spatial cut-off of the tilt.
    pub profile_radius: Option<f64>,
    /// Constraint times and values for the finite-dimensional rate.
    pub times: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Observation-time grid for path-rate checks.
    pub path_grid: usize,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            grid_points: 11,
            block: None,
            bump_radius: 1.0,
            bump_amplitude: 1.0,
            bump_slope: 0.0,
            target_time: None,
            target_alpha: 0.5,
            profile_radius: None,
            times: vec![1.0, 2.0],
            alphas: vec![1.0, 1.0],
            path_grid: 256,
        }
    }
}

/// On-disk layout: model constants at the top level plus optional knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    n: usize,
    #[serde(default = "one")]
    d: usize,
    alpha: f64,
    beta: f64,
    rho: f64,
    theta: f64,
    #[serde(rename = "T")]
    horizon: f64,
    #[serde(rename = "L_macro")]
    l_macro: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "one")]
    replicas: usize,
    #[serde(default)]
    kind: Option<ExperimentKind>,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    options: ExperimentOptions,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub params: ScalingParams,
    pub kind: ExperimentKind,
    pub replicas: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub options: ExperimentOptions,
}

impl ExperimentSpec {
    /// Parses a config; `kind` falls back to `default_kind` when the file has none.
    pub fn from_toml_str(text: &str, default_kind: Option<ExperimentKind>) -> Result<Self> {
        let f: ConfigFile = toml::from_str(text)?;
        let kind = f
            .kind
            .or(default_kind)
            .ok_or_else(|| Error::InvalidSpec("no experiment kind given".into()))?;
        let spec = Self {
            params: ScalingParams {
                n: f.n,
                d: f.d,
                alpha: f.alpha,
                beta: f.beta,
                rho: f.rho,
                theta: f.theta,
                horizon: f.horizon,
                l_macro: f.l_macro,
            },
            kind,
            replicas: f.replicas,
            seed: f.seed,
            out: f.out.unwrap_or_else(|| PathBuf::from("out")),
            options: f.options,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path, default_kind: Option<ExperimentKind>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?, default_kind)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        if self.options.grid_points < 2 {
            return bad("grid_points must be at least 2".into());
        }
        let one_dim = matches!(
            self.kind,
            ExperimentKind::OccupationVariance | ExperimentKind::TiltedHydro | ExperimentKind::MdpEstimate
        );
        if one_dim && self.params.d != 1 {
            return bad(format!("{} is only defined in one dimension", self.kind.name()));
        }
        if self.kind == ExperimentKind::MdpEstimate && self.replicas < 100 {
            return bad("mdp-estimate needs at least 100 replicas".into());
        }
        if self.kind == ExperimentKind::VerifyRates && self.options.times.len() != self.options.alphas.len() {
            return bad("times and alphas must have the same length".into());
        }
        if !(self.options.bump_radius > 0.0) {
            return bad("bump_radius must be positive".into());
        }
        Ok(())
    }

    /// `grid_points` equally spaced times on `[0, T]`.
    pub fn grid(&self) -> Vec<f64> {
        let k = self.options.grid_points - 1;
        (0..=k).map(|i| self.params.horizon * i as f64 / k as f64).collect()
    }

    pub fn target_time(&self) -> f64 {
        self.options.target_time.unwrap_or(self.params.horizon)
    }

    /// Default tilt cut-off: just inside half the torus.
    pub fn profile_radius(&self) -> f64 {
        self.options
            .profile_radius
            .unwrap_or(0.5 * self.params.l_macro as f64 - 0.5)
    }
}
