//! Gaussian process machinery over the extended domain `X x {objective, constraint}`.
//!
//! A single [`GaussianPosterior`] models both the objective `f` (channel 0) and
//! the safety constraint `s` (channel 1). The prior mean is zero; offsets are
//! expected to be folded into the latent functions.

mod kernel;
mod noise;
mod posterior;
mod sampling;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kernel::{ExtendedKernel, KernelFamily, KernelSpec};
pub use noise::NoiseModel;
pub use posterior::{GaussianPosterior, PosteriorBatch};
pub use sampling::{sample_prior_function, sample_prior_tensor_grid};

/// Output channel of the extended domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Objective = 0,
    Constraint = 1,
}

impl Channel {
    pub const BOTH: [Channel; 2] = [Channel::Objective, Channel::Constraint];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A parameter together with the output channel it refers to.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedPoint {
    pub x: Vec<f64>,
    pub channel: Channel,
}

impl ExtendedPoint {
    pub fn new(x: Vec<f64>, channel: Channel) -> Self {
        Self { x, channel }
    }

    pub fn objective(x: Vec<f64>) -> Self {
        Self::new(x, Channel::Objective)
    }

    pub fn constraint(x: Vec<f64>) -> Self {
        Self::new(x, Channel::Constraint)
    }
}

/// One noisy evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub point: ExtendedPoint,
    pub value: f64,
    pub noise_var: f64,
    /// Extra diagonal term added when the factorization needed stabilizing.
    pub jitter: f64,
}

impl Observation {
    pub fn new(point: ExtendedPoint, value: f64, noise_var: f64) -> Self {
        Self { point, value, noise_var, jitter: 0.0 }
    }

    /// Diagonal contribution of this observation to the Gram matrix.
    pub fn diagonal_noise(&self) -> f64 {
        self.noise_var + self.jitter
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("covariance factorization failed after adding jitter {jitter:e} to the diagonal")]
    Factorization { jitter: f64 },
    #[error("degenerate correlation: posterior variance is zero at one of the points")]
    DegenerateCorrelation,
    #[error("noise variance must be positive, got {0}")]
    NonPositiveNoise(f64),
    #[error("point has dimension {got}, kernel expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid GP configuration: {0}")]
    Config(String),
}
