use serde::{Deserialize, Serialize};

use crate::gp::KernelSpec;

use super::{GridGp, TheoryError};

/// Cap on the number of conditionings per call.
pub const MAX_CONDITIONINGS: usize = 10_000;

/// Result of repeatedly measuring the current safe set until it is known to
/// `eps` precision and re-deriving the lower-bound safe set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionState {
    pub grid: Vec<Vec<f64>>,
    pub safe: Vec<bool>,
    pub eps: f64,
    /// Expansion rounds until no growth.
    pub rounds: usize,
    pub conditionings: usize,
    /// Safe-set size after each round, starting with the seed alone.
    pub sizes: Vec<usize>,
}

impl ExpansionState {
    pub fn safe_count(&self) -> usize {
        self.safe.iter().filter(|s| **s).count()
    }
}

/// Fixed point of the per-GP expansion operator on a grid.
///
/// Measurements return the exact value `s(x)` while the model keeps noise
/// variance `noise_var`; the point with the largest `beta sigma` in the safe set
/// is measured until that width drops to `eps`.
pub fn expansion_fixed_point(
    kernel: &KernelSpec,
    grid: &[Vec<f64>],
    s_values: &[f64],
    noise_var: f64,
    x0: usize,
    eps: f64,
    beta: f64,
) -> Result<ExpansionState, TheoryError> {
    if grid.len() != s_values.len() || x0 >= grid.len() {
        return Err(TheoryError::Config("grid, values and seed index disagree".into()));
    }
    if !(eps > 0.0 && beta > 0.0 && noise_var > 0.0) {
        return Err(TheoryError::Config(format!("need eps, beta, noise > 0; got {eps}, {beta}, {noise_var}")));
    }
    if s_values[x0] < 0.0 {
        return Err(TheoryError::UnsafeSeed(s_values[x0]));
    }
    let mut gp = GridGp::new(kernel.clone(), grid.to_vec(), noise_var);
    let mut safe = vec![false; grid.len()];
    safe[x0] = true;
    let mut sizes = vec![1];
    let mut rounds = 0;
    loop {
        // Reduce the width on the safe set.
        loop {
            let widest = (0..grid.len())
                .filter(|&i| safe[i])
                .map(|i| (i, beta * gp.variances()[i].sqrt()))
                .fold((x0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
            if widest.1 <= eps {
                break;
            }
            if gp.observations() >= MAX_CONDITIONINGS {
                return Err(TheoryError::ConditioningCap(MAX_CONDITIONINGS));
            }
            gp.observe(widest.0, s_values[widest.0]);
        }
        let mut grew = false;
        for i in 0..grid.len() {
            if !safe[i] && gp.means()[i] - beta * gp.variances()[i].sqrt() >= 0.0 {
                safe[i] = true;
                grew = true;
            }
        }
        rounds += 1;
        sizes.push(safe.iter().filter(|s| **s).count());
        if !grew {
            break;
        }
    }
    Ok(ExpansionState { grid: grid.to_vec(), safe, eps, rounds, conditionings: gp.observations(), sizes })
}
