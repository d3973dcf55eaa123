use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Observation-noise variance as a function of the evaluated parameter.
#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    Homoskedastic { variance: f64 },
    /// `at_or_above` where `x[axis] >= threshold`, `below` elsewhere.
    HalfSpace { axis: usize, threshold: f64, at_or_above: f64, below: f64 },
    #[serde(skip)]
    Function(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl NoiseModel {
    pub fn homoskedastic(variance: f64) -> Self {
        Self::Homoskedastic { variance }
    }

    pub fn variance(&self, x: &[f64]) -> f64 {
        match self {
            Self::Homoskedastic { variance } => *variance,
            Self::HalfSpace { axis, threshold, at_or_above, below } => {
                if x[*axis] >= *threshold {
                    *at_or_above
                } else {
                    *below
                }
            }
            Self::Function(f) => f(x),
        }
    }

    pub fn is_heteroskedastic(&self) -> bool {
        !matches!(self, Self::Homoskedastic { .. })
    }

    /// Smallest variance the model can return, when it is known in closed form.
    pub fn min_variance(&self) -> Option<f64> {
        match self {
            Self::Homoskedastic { variance } => Some(*variance),
            Self::HalfSpace { at_or_above, below, .. } => Some(at_or_above.min(*below)),
            Self::Function(_) => None,
        }
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match self {
            Self::Homoskedastic { variance } if !positive(*variance) => {
                Err(format!("noise variance must be positive, got {variance}"))
            }
            Self::HalfSpace { at_or_above, below, .. } if !positive(*at_or_above) || !positive(*below) => {
                Err(format!("noise variances must be positive, got {at_or_above} and {below}"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Debug for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Homoskedastic { variance } => f.debug_struct("Homoskedastic").field("variance", variance).finish(),
            Self::HalfSpace { axis, threshold, at_or_above, below } => f
                .debug_struct("HalfSpace")
                .field("axis", axis)
                .field("threshold", threshold)
                .field("at_or_above", at_or_above)
                .field("below", below)
                .finish(),
            Self::Function(_) => f.write_str("Function(..)"),
        }
    }
}
