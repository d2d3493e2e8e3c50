//! Model constants and the admissibility window for the moderate-deviation scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All constants of one WASEP model instance.
///
/// The lattice is a periodic torus with `l_macro * n` sites per axis; the
/// moderate-deviation scale is the power family `a_n = n^theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub theta: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "L_macro")]
    pub l_macro: usize,
}

impl ScalingParams {
    pub fn new(
        n: usize,
        d: usize,
        alpha: f64,
        beta: f64,
        rho: f64,
        theta: f64,
        horizon: f64,
        l_macro: usize,
    ) -> Result<Self> {
        let p = Self {
            n,
            d,
            alpha,
            beta,
            rho,
            theta,
            horizon,
            l_macro,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if !(1..=3).contains(&self.d) {
            return bad("dimension must be 1, 2 or 3");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be finite and nonnegative");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie in (0, 1)");
        }
        if !self.theta.is_finite() {
            return bad("theta must be finite");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon T must be positive");
        }
        if self.l_macro == 0 {
            return bad("L_macro must be positive");
        }
        Ok(())
    }

    /// Sites per axis of the torus.
    pub fn side(&self) -> usize {
        self.l_macro * self.n
    }

    pub fn num_sites(&self) -> usize {
        self.side().pow(self.d as u32)
    }

    pub fn a_n(&self) -> f64 {
        a_n(self)
    }

    pub fn chi(&self) -> f64 {
        self.rho * (1.0 - self.rho)
    }

    /// `a_n / n^d`, the per-site weight of a test function in the field exponent.
    pub fn kappa(&self) -> f64 {
        self.a_n() / self.n_pow_d()
    }

    /// Decay speed `a_n^2 / n^d`.
    pub fn speed(&self) -> f64 {
        let a = self.a_n();
        a * a / self.n_pow_d()
    }

    pub fn n_pow_d(&self) -> f64 {
        (self.n as f64).powi(self.d as i32)
    }

    pub fn drift_velocity(&self) -> f64 {
        drift_velocity(self)
    }

    /// Macroscopic rate of a `x -> x + e_i` attempt (symmetric plus asymmetric part).
    pub fn forward_rate(&self) -> f64 {
        let n2 = (self.n * self.n) as f64;
        let d = self.d as f64;
        n2 * (0.5 / d + self.alpha * (self.n as f64).powf(-self.beta) / d)
    }

    /// Macroscopic rate of a `x -> x - e_i` attempt.
    pub fn backward_rate(&self) -> f64 {
        let n2 = (self.n * self.n) as f64;
        n2 * 0.5 / self.d as f64
    }

    /// Prefactor `alpha n^{2-beta} / d` of the asymmetric generator.
    pub fn asym_prefactor(&self) -> f64 {
        self.alpha * (self.n as f64).powf(2.0 - self.beta) / self.d as f64
    }
}

/// Moderate-deviation scale `a_n = n^theta`.
pub fn a_n(params: &ScalingParams) -> f64 {
    (params.n as f64).powf(params.theta)
}

/// Static compressibility `rho (1 - rho)`.
pub fn chi(rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::DensityOutOfRange(rho));
    }
    Ok(rho * (1.0 - rho))
}

/// Lattice-units-per-macroscopic-time speed of the moving frame.
pub fn drift_velocity(params: &ScalingParams) -> f64 {
    params.alpha * (1.0 - 2.0 * params.rho) * (params.n as f64).powf(2.0 - params.beta)
        / params.d as f64
}

/// One strict exponent inequality of the admissibility window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Outcome of checking `a_n = n^theta` against the admissibility window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub d: usize,
    pub beta: f64,
    pub theta: f64,
    pub checks: Vec<WindowCheck>,
    pub notes: Vec<String>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.holds)
            .map(|c| c.name.as_str())
            .collect()
    }
}

fn greater(name: &str, lhs: f64, rhs: f64) -> WindowCheck {
    WindowCheck {
        name: name.to_string(),
        lhs,
        rhs,
        holds: lhs > rhs,
    }
}

/// Checks the exponent-level form of the admissibility window:
/// `d/2 < theta < min(d, d + beta - 1)` together with the dimension-specific
/// lower bounds on `beta` and `theta`. Logarithmic factors are not representable
/// by a pure power and are ignored (recorded in `notes`).
pub fn validate_assumption(params: &ScalingParams) -> AssumptionReport {
    let d = params.d as f64;
    let beta = params.beta;
    let theta = params.theta;
    let mut checks = vec![
        greater("theta>d/2", theta, d / 2.0),
        greater("theta<min(d,d+beta-1)", d.min(d + beta - 1.0), theta),
    ];
    let mut notes = vec!["sqrt(log n) factor in the lower window bound checked at exponent level only".to_string()];
    match params.d {
        1 => {
            checks.push(greater("beta>2/3", beta, 2.0 / 3.0));
            checks.push(greater("theta>1-beta/2", theta, 1.0 - beta / 2.0));
        }
        2 => {
            checks.push(greater("beta>1/2", beta, 0.5));
            checks.push(greater("theta>2-beta", theta, 2.0 - beta));
            notes.push(
                "d=2: the (log n)^(1/(1-eps0)) factor is ignored; bound checked at exponent level only"
                    .to_string(),
            );
        }
        _ => {
            checks.push(greater("beta>1/2", beta, 0.5));
            checks.push(greater("theta>d-beta", theta, d - beta));
        }
    }
    AssumptionReport {
        d: params.d,
        beta,
        theta,
        checks,
        notes,
    }
}
