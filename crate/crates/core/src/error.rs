use thiserror::Error;

/// Errors raised across the simulator and the rate-theory numerics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("density {0} outside [0, 1]")]
    DensityOutOfRange(f64),

    #[error("marginal probability {value} at site {site} outside [0, 1]")]
    MarginalOutOfRange { site: usize, value: f64 },

    #[error("support radius {radius} does not fit in half the torus (macroscopic side {side})")]
    SupportTooLarge { radius: f64, side: f64 },

    #[error(
        "thinning bound exceeded at t = {time}: rate {rate} > dominating rate {bound} (bond at site {site})"
    )]
    ThinningBound {
        time: f64,
        site: usize,
        rate: f64,
        bound: f64,
    },

    #[error("path does not match lattice: {0}")]
    LatticeMismatch(String),

    #[error("local window of {size} sites is too large: {reason}")]
    WindowTooLarge { size: usize, reason: String },

    #[error("quadrature did not converge on [{a}, {b}]: estimate {estimate}, error {error}")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
    },

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("times must be strictly increasing and positive: {0:?}")]
    NonIncreasingTimes(Vec<f64>),

    #[error("grid must be uniform and start at 0 with at least {min} points")]
    NonUniformGrid { min: usize },

    #[error("kernel argument requires 0 < s < t, got s = {s}, t = {t}")]
    KernelDomain { s: f64, t: f64 },

    #[error("heat kernel requires t > 0, got {0}")]
    NonPositiveTime(f64),

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),

    #[error("config parse error: {0}")]
    Config(#[from] toml::de::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
