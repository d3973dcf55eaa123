//! Test problems: synthetic functions, GP samples and a simulated pendulum.

mod gp_sample;
mod hetero;
mod pendulum;
mod regret;
mod synthetic;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::gp::{Channel, ExtendedKernel, NoiseModel};
use crate::search::BoxDomain;

pub use gp_sample::{gp_sample_problem, GridFunction, GP_SAMPLE_RESOLUTION};
pub use hetero::{hetero_function, heteroskedastic_problem};
pub use pendulum::{pendulum_problem, simulate_pendulum, PendulumConfig};
pub use regret::{best_safe_values, simple_regret};
pub use synthetic::{synthetic_1d, synthetic_1d_function};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchmarkError {
    #[error("unknown benchmark '{0}'")]
    Unknown(String),
    #[error("safe seed {x0:?} violates the constraint (s = {value})")]
    UnsafeSeed { x0: Vec<f64>, value: f64 },
    #[error("simulation diverged for controller parameters {params:?}")]
    Simulation { params: Vec<f64> },
    #[error("benchmark setup failed: {0}")]
    Setup(String),
}

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 6] = ["synthetic1d", "gp2d_same", "gp2d_indep", "hetero4", "hetero6", "pendulum"];

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> Result<f64, BenchmarkError> + Send + Sync>;

/// Objective, constraint, noise and prior for one problem instance.
#[derive(Clone)]
pub struct BenchmarkProblem {
    pub name: String,
    pub domain: BoxDomain,
    objective: ScalarFn,
    constraint: ScalarFn,
    pub noise: [NoiseModel; 2],
    pub kernel: ExtendedKernel,
    pub x0: Vec<f64>,
    /// Best objective value over the safe region reachable from `x0`.
    pub fstar: f64,
    /// How `fstar` was obtained.
    pub fstar_source: String,
    /// Objective and constraint are the same function.
    pub same_function: bool,
}

impl fmt::Debug for BenchmarkProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BenchmarkProblem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("x0", &self.x0)
            .field("fstar", &self.fstar)
            .field("fstar_source", &self.fstar_source)
            .finish_non_exhaustive()
    }
}

impl BenchmarkProblem {
    /// Builds a problem, rejecting an unsafe seed.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        domain: BoxDomain,
        objective: ScalarFn,
        constraint: ScalarFn,
        noise: [NoiseModel; 2],
        kernel: ExtendedKernel,
        x0: Vec<f64>,
        fstar: f64,
        fstar_source: impl Into<String>,
        same_function: bool,
    ) -> Result<Self, BenchmarkError> {
        let value = constraint(&x0)?;
        if value < 0.0 {
            return Err(BenchmarkError::UnsafeSeed { x0, value });
        }
        Ok(Self {
            name: name.into(),
            domain,
            objective,
            constraint,
            noise,
            kernel,
            x0,
            fstar,
            fstar_source: fstar_source.into(),
            same_function,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn objective(&self, x: &[f64]) -> Result<f64, BenchmarkError> {
        (self.objective)(x)
    }

    pub fn constraint(&self, x: &[f64]) -> Result<f64, BenchmarkError> {
        (self.constraint)(x)
    }

    pub fn noise_variance(&self, channel: Channel, x: &[f64]) -> f64 {
        self.noise[channel.index()].variance(x)
    }

    /// True constraint violation at `x`; metrics only.
    pub fn safe_violation_check(&self, x: &[f64]) -> Result<bool, BenchmarkError> {
        Ok(crate::safe_set::is_violation(self.constraint(x)?))
    }

    /// Boolean mask of the grid nodes 4-connected to the node nearest `x0`
    /// through `{s >= 0}` on a `resolution`-per-axis grid of the domain.
    pub fn reachable_safe_grid(&self, resolution: usize) -> Result<(Vec<Vec<f64>>, Vec<bool>), BenchmarkError> {
        let grid = self.domain.grid(resolution);
        let values = grid.iter().map(|x| self.constraint(x)).collect::<Result<Vec<_>, _>>()?;
        let dims = vec![resolution; self.dim()];
        let start = nearest_node(&self.domain, resolution, &self.x0);
        Ok((grid, flood_fill(&values, &dims, start)))
    }
}

/// Flat index of the grid node closest to `x`.
pub fn nearest_node(domain: &BoxDomain, resolution: usize, x: &[f64]) -> usize {
    let mut index = 0;
    for (k, v) in x.iter().enumerate() {
        let t = (v - domain.lower[k]) / domain.width(k) * (resolution - 1) as f64;
        let i = (t.round().max(0.0) as usize).min(resolution - 1);
        index = index * resolution + i;
    }
    index
}

/// Nodes reachable from `start` through axis-neighbour steps on `{v >= 0}`.
/// `values` is row-major over `dims` with the last axis fastest.
pub fn flood_fill(values: &[f64], dims: &[usize], start: usize) -> Vec<bool> {
    let mut seen = vec![false; values.len()];
    if values[start] < 0.0 {
        return seen;
    }
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        for (k, &stride) in strides.iter().enumerate() {
            let coord = (i / stride) % dims[k];
            let mut push = |j: usize| {
                if !seen[j] && values[j] >= 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if coord > 0 {
                push(i - stride);
            }
            if coord + 1 < dims[k] {
                push(i + stride);
            }
        }
    }
    seen
}

/// Instantiates a registered benchmark; `seed` only matters for GP samples.
pub fn by_name(name: &str, seed: u64) -> Result<BenchmarkProblem, BenchmarkError> {
    match name {
        "synthetic1d" => synthetic_1d(),
        "gp2d_same" => gp_sample_problem(seed, true),
        "gp2d_indep" => gp_sample_problem(seed, false),
        "hetero4" => heteroskedastic_problem(4),
        "hetero6" => heteroskedastic_problem(6),
        "pendulum" => pendulum_problem(&PendulumConfig::default()),
        other => Err(BenchmarkError::Unknown(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flood_fill_stops_at_barriers() {
        // 1 x 7 strip with a negative cell at index 3.
        let values = [1.0, 1.0, 0.0, -1.0, 1.0, 1.0, 1.0];
        let reach = flood_fill(&values, &[7], 1);
        assert_eq!(reach, vec![true, true, true, false, false, false, false]);
    }

    #[test]
    fn flood_fill_uses_axis_neighbours_only() {
        // 3 x 3 with the anti-diagonal blocked: the corner is cut off.
        #[rustfmt::skip]
        let values = [
            1.0, 1.0, -1.0,
            1.0, -1.0, 1.0,
            -1.0, 1.0, 1.0,
        ];
        let reach = flood_fill(&values, &[3, 3], 0);
        assert_eq!(reach.iter().filter(|b| **b).count(), 3);
        assert!(!reach[8]);
    }

    #[test]
    fn nearest_node_rounds() {
        let domain = BoxDomain::cube(2, -1.0, 1.0);
        assert_eq!(nearest_node(&domain, 3, &[0.0, 0.0]), 4);
        assert_eq!(nearest_node(&domain, 3, &[0.9, -0.9]), 6);
    }

    #[test]
    fn registry_rejects_unknown_names() {
        assert!(matches!(by_name("nope", 0), Err(BenchmarkError::Unknown(_))));
        for name in NAMES {
            let p = by_name(name, 1).unwrap();
            assert!(p.constraint(&p.x0).unwrap() >= 0.0, "{name}");
            assert!(p.domain.contains(&p.x0));
        }
    }
}
