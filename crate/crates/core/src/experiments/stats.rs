//! Ensemble statistics and prediction comparisons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean, unbiased variance and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
    pub count: usize,
    /// Standard error of the variance estimate itself.
    pub variance_stderr: f64,
}

impl Moments {
    pub fn of(samples: &[f64]) -> Self {
        let count = samples.len();
        let n = count as f64;
        if count == 0 {
            return Self {
                mean: 0.0,
                variance: 0.0,
                stderr: 0.0,
                count,
                variance_stderr: 0.0,
            };
        }
        let mean = samples.iter().sum::<f64>() / n;
        let dev2: Vec<f64> = samples.iter().map(|x| (x - mean).powi(2)).collect();
        let ss: f64 = dev2.iter().sum();
        let variance = if count > 1 { ss / (n - 1.0) } else { 0.0 };
        let m2 = ss / n;
        let var_of_dev2 = if count > 1 {
            dev2.iter().map(|d| (d - m2).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            variance,
            stderr: (variance / n).sqrt(),
            count,
            variance_stderr: (var_of_dev2 / n).sqrt(),
        }
    }
}

/// Per-grid-time moments of one observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub name: String,
    pub times: Vec<f64>,
    pub moments: Vec<Moments>,
}

impl SeriesStats {
    /// `rows[r][k]` is replica `r` at grid time `k`.
    pub fn from_rows(name: &str, times: &[f64], rows: &[Vec<f64>]) -> Result<Self> {
        if rows.iter().any(|r| r.len() != times.len()) {
            return Err(Error::GridMismatch(format!("series {name} has rows of the wrong length")));
        }
        let moments = (0..times.len())
            .map(|k| Moments::of(&rows.iter().map(|r| r[k]).collect::<Vec<_>>()))
            .collect();
        Ok(Self {
            name: name.to_string(),
            times: times.to_vec(),
            moments,
        })
    }

    pub fn means(&self) -> Estimate {
        Estimate {
            times: self.times.clone(),
            values: self.moments.iter().map(|m| m.mean).collect(),
            stderr: self.moments.iter().map(|m| m.stderr).collect(),
        }
    }

    pub fn variances(&self) -> Estimate {
        Estimate {
            times: self.times.clone(),
            values: self.moments.iter().map(|m| m.variance).collect(),
            stderr: self.moments.iter().map(|m| m.variance_stderr).collect(),
        }
    }
}

/// Scalar summary plus per-grid series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
    pub count: usize,
    pub series: Vec<SeriesStats>,
}

impl SummaryStats {
    /// `headline` is the per-replica scalar the experiment reports.
    pub fn new(headline: &[f64], series: Vec<SeriesStats>) -> Self {
        let m = Moments::of(headline);
        Self {
            mean: m.mean,
            variance: m.variance,
            stderr: m.stderr,
            count: m.count,
            series,
        }
    }

    pub fn series(&self, name: &str) -> Option<&SeriesStats> {
        self.series.iter().find(|s| s.name == name)
    }
}

/// Values with standard errors on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "bound", rename_all = "kebab-case")]
pub enum Tolerance {
    /// Every `|z| <= bound`.
    ZScore(f64),
    /// Every relative error `<= bound`.
    Relative(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub times: Vec<f64>,
    pub simulated: Vec<f64>,
    pub predicted: Vec<f64>,
    pub z: Vec<f64>,
    pub relative_error: Vec<f64>,
    pub tolerance: Tolerance,
    pub pass: bool,
}

/// Pointwise comparison; grids must agree to `1e-12`.
pub fn compare(sim: &Estimate, prediction: &Prediction, tolerance: Tolerance) -> Result<Comparison> {
    let same = sim.times.len() == prediction.times.len()
        && sim.values.len() == sim.times.len()
        && sim.stderr.len() == sim.times.len()
        && prediction.values.len() == prediction.times.len()
        && sim
            .times
            .iter()
            .zip(&prediction.times)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
    if !same {
        return Err(Error::GridMismatch(format!(
            "{} simulated points vs {} predicted points",
            sim.times.len(),
            prediction.times.len()
        )));
    }
    let mut z = Vec::with_capacity(sim.times.len());
    let mut rel = Vec::with_capacity(sim.times.len());
    for k in 0..sim.times.len() {
        let diff = sim.values[k] - prediction.values[k];
        z.push(if diff == 0.0 { 0.0 } else { diff / sim.stderr[k] });
        rel.push(if diff == 0.0 { 0.0 } else { diff.abs() / prediction.values[k].abs() });
    }
    let pass = match tolerance {
        Tolerance::ZScore(b) => z.iter().all(|v| v.abs() <= b),
        Tolerance::Relative(b) => rel.iter().all(|v| *v <= b),
    };
    Ok(Comparison {
        times: sim.times.clone(),
        simulated: sim.values.clone(),
        predicted: prediction.values.clone(),
        z,
        relative_error: rel,
        tolerance,
        pass,
    })
}
