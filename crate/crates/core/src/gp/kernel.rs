use serde::{Deserialize, Serialize};

use super::{Channel, ExtendedPoint};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    #[default]
    Rbf,
}

/// Stationary kernel on the parameter space, one per output channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(default)]
    pub family: KernelFamily,
    /// One lengthscale per input dimension.
    pub lengthscales: Vec<f64>,
    pub outputscale: f64,
}

impl KernelSpec {
    pub fn rbf(lengthscales: Vec<f64>, outputscale: f64) -> Self {
        Self { family: KernelFamily::Rbf, lengthscales, outputscale }
    }

    pub fn isotropic(dim: usize, lengthscale: f64, outputscale: f64) -> Self {
        Self::rbf(vec![lengthscale; dim], outputscale)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Same kernel rescaled so that `k(x, x) = 1`.
    pub fn normalized(&self) -> Self {
        Self { outputscale: 1.0, ..self.clone() }
    }

    pub fn prior_variance(&self) -> f64 {
        self.outputscale
    }

    /// Kernel without the output scale, `k(a, b) / outputscale`.
    pub fn correlation(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.lengthscales.len());
        let mut r2 = 0.0;
        for ((ai, bi), l) in a.iter().zip(b).zip(&self.lengthscales) {
            let d = (ai - bi) / l;
            r2 += d * d;
        }
        match self.family {
            KernelFamily::Rbf => (-0.5 * r2).exp(),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self.outputscale * self.correlation(a, b)
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        if self.lengthscales.is_empty() {
            return Err("kernel needs at least one lengthscale".into());
        }
        if self.lengthscales.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(format!("lengthscales must be positive, got {:?}", self.lengthscales));
        }
        if !(self.outputscale > 0.0 && self.outputscale.is_finite()) {
            return Err(format!("outputscale must be positive, got {}", self.outputscale));
        }
        Ok(())
    }
}

/// Kernel over the extended domain `X x {objective, constraint}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtendedKernel {
    /// `k((x,i),(x',j)) = delta_ij k_i(x,x')`: the two channels are independent GPs.
    BlockDiagonal { objective: KernelSpec, constraint: KernelSpec },
    /// Intrinsic coregionalization `B_ij k(x,x')` with a 2x2 positive semi-definite `B`.
    Coregionalized { base: KernelSpec, coregion: [[f64; 2]; 2] },
}

impl ExtendedKernel {
    pub fn independent(objective: KernelSpec, constraint: KernelSpec) -> Self {
        Self::BlockDiagonal { objective, constraint }
    }

    /// Same kernel on both channels, no cross-channel correlation.
    pub fn shared(kernel: KernelSpec) -> Self {
        Self::BlockDiagonal { objective: kernel.clone(), constraint: kernel }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::BlockDiagonal { objective, .. } => objective.dim(),
            Self::Coregionalized { base, .. } => base.dim(),
        }
    }

    pub fn is_block_diagonal(&self) -> bool {
        matches!(self, Self::BlockDiagonal { .. })
    }

    pub fn channel_kernel(&self, channel: Channel) -> KernelSpec {
        match self {
            Self::BlockDiagonal { objective, constraint } => match channel {
                Channel::Objective => objective.clone(),
                Channel::Constraint => constraint.clone(),
            },
            Self::Coregionalized { base, coregion } => {
                let i = channel.index();
                KernelSpec { outputscale: base.outputscale * coregion[i][i], ..base.clone() }
            }
        }
    }

    /// Covariance between two points of the same channel.
    pub fn eval_channel(&self, channel: Channel, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Self::BlockDiagonal { objective, constraint } => match channel {
                Channel::Objective => objective.eval(a, b),
                Channel::Constraint => constraint.eval(a, b),
            },
            Self::Coregionalized { base, coregion } => {
                let i = channel.index();
                coregion[i][i] * base.eval(a, b)
            }
        }
    }

    pub fn eval(&self, a: &ExtendedPoint, b: &ExtendedPoint) -> f64 {
        self.eval_parts(a.channel, &a.x, b.channel, &b.x)
    }

    pub fn eval_parts(&self, ca: Channel, a: &[f64], cb: Channel, b: &[f64]) -> f64 {
        match self {
            Self::BlockDiagonal { .. } => {
                if ca == cb {
                    self.eval_channel(ca, a, b)
                } else {
                    0.0
                }
            }
            Self::Coregionalized { base, coregion } => coregion[ca.index()][cb.index()] * base.eval(a, b),
        }
    }

    pub fn prior_variance(&self, channel: Channel) -> f64 {
        self.channel_kernel(channel).outputscale
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        match self {
            Self::BlockDiagonal { objective, constraint } => {
                objective.validate()?;
                constraint.validate()?;
                if objective.dim() != constraint.dim() {
                    return Err("objective and constraint kernels differ in dimension".into());
                }
                Ok(())
            }
            Self::Coregionalized { base, coregion } => {
                base.validate()?;
                let [[a, b], [c, d]] = *coregion;
                if (b - c).abs() > 1e-12 || a <= 0.0 || d <= 0.0 || a * d - b * c < 0.0 {
                    return Err(format!("coregionalization matrix {coregion:?} is not PSD"));
                }
                Ok(())
            }
        }
    }
}
