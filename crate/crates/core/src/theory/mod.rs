//! Quantities from the convergence analysis: the `eta` and `b` functions,
//! information capacity estimates, `N_eps` and the expansion fixed point on a grid.

mod expansion;
mod grid_gp;

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::C1;
use crate::gp::KernelSpec;
use crate::safe_set::BetaSchedule;

pub use expansion::{expansion_fixed_point, ExpansionState, MAX_CONDITIONINGS};
pub use grid_gp::GridGp;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("invalid theory input: {0}")]
    Config(String),
    #[error("safe seed has s = {0} < 0")]
    UnsafeSeed(f64),
    #[error("expansion did not reach beta sigma <= eps within {0} conditionings")]
    ConditioningCap(usize),
}

/// `ln 2 exp(-c1 M^2 / x) [1 - sqrt(s2 / (2 c1 x + s2))]`
pub fn eta(x: f64, m: f64, noise_var: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    LN_2 * (-C1 * m * m / x).exp() * (1.0 - (noise_var / (2.0 * C1 * x + noise_var)).sqrt())
}

/// `min(eta(x), x / phi)`
pub fn b_function(x: f64, m: f64, noise_var: f64, phi: f64) -> f64 {
    eta(x, m, noise_var).min(x / phi)
}

/// Which increasing function is inverted in the `N_eps` condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateFunction {
    Eta { m: f64, noise_var: f64 },
    B { m: f64, noise_var: f64, phi: f64 },
}

impl RateFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Eta { m, noise_var } => eta(x, m, noise_var),
            Self::B { m, noise_var, phi } => b_function(x, m, noise_var, phi),
        }
    }

    fn validate(&self) -> Result<(), TheoryError> {
        let (m, noise_var, phi) = match *self {
            Self::Eta { m, noise_var } => (m, noise_var, 1.0),
            Self::B { m, noise_var, phi } => (m, noise_var, phi),
        };
        if !(m >= 0.0 && noise_var > 0.0 && phi > 0.0) {
            return Err(TheoryError::Config(format!("need M >= 0, noise > 0, phi > 0 in {self:?}")));
        }
        Ok(())
    }

    /// Smallest `x` with `g(x) >= y`, by bisection to `1e-10` relative width.
    /// Infinite when `y` is at or above the supremum `ln 2`.
    pub fn inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= LN_2 {
            return f64::INFINITY;
        }
        let mut hi = 1.0;
        while self.eval(hi) < y {
            hi *= 2.0;
            if hi > 1e300 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-10 * hi.max(1e-300) {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) >= y {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Constant `C` in the sample-complexity bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum CPreset {
    /// `ln 2 / (s2 ln(1 + 1 / s2))`
    Exploration { noise_var: f64 },
    /// `max(ln 2 / s2, 1 / (phi - 2 beta))`
    Optimization { noise_var: f64, phi: f64, beta: f64 },
}

impl CPreset {
    pub fn value(&self) -> Result<f64, TheoryError> {
        match *self {
            Self::Exploration { noise_var } if noise_var > 0.0 => Ok(LN_2 / (noise_var * (1.0 / noise_var).ln_1p())),
            Self::Optimization { noise_var, phi, beta } if noise_var > 0.0 && phi > 2.0 * beta => {
                Ok((LN_2 / noise_var).max(1.0 / (phi - 2.0 * beta)))
            }
            other => Err(TheoryError::Config(format!("invalid constant preset {other:?}"))),
        }
    }
}

/// `gamma_N` for `N = 0, 1, ...`; `gamma_0 = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacitySequence(Vec<f64>);

impl CapacitySequence {
    pub fn new(values: Vec<f64>) -> Result<Self, TheoryError> {
        if values.first() != Some(&0.0) {
            return Err(TheoryError::Config("capacity sequence must start at gamma_0 = 0".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) || values.iter().any(|v| !v.is_finite()) {
            return Err(TheoryError::Config("capacity sequence must be finite and non-decreasing".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Largest `N` covered.
    pub fn max_n(&self) -> usize {
        self.0.len() - 1
    }

    pub fn get(&self, n: usize) -> Option<f64> {
        self.0.get(n).copied()
    }
}

/// Greedy lower estimate of the information capacity on a finite grid:
/// each step adds the point with largest `1/2 ln(1 + sigma^2 / s2)`.
pub fn empirical_gamma(kernel: &KernelSpec, grid: &[Vec<f64>], noise_var: f64, n_max: usize) -> Result<CapacitySequence, TheoryError> {
    if grid.is_empty() || !(noise_var > 0.0) {
        return Err(TheoryError::Config("need a non-empty grid and positive noise".into()));
    }
    let mut gp = GridGp::new(kernel.clone(), grid.to_vec(), noise_var);
    let mut gamma = Vec::with_capacity(n_max + 1);
    gamma.push(0.0);
    for _ in 0..n_max {
        let (j, v) = gp
            .variances()
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        let last = *gamma.last().unwrap();
        gamma.push(last + 0.5 * (v.max(0.0) / noise_var).ln_1p());
        gp.observe(j, 0.0);
    }
    CapacitySequence::new(gamma)
}

/// `beta_N g^{-1}(C gamma_N / N)`; the condition reads `<= eps`.
pub fn n_epsilon_lhs(n: usize, beta: &BetaSchedule, gamma: &CapacitySequence, g: &RateFunction, c: f64) -> f64 {
    let gn = gamma.get(n).unwrap_or(f64::NAN);
    beta.beta(n) * g.inverse(c * gn / n as f64)
}

/// Direct form of the condition: `g(eps / beta_N) >= C gamma_N / N`.
pub fn n_epsilon_holds(eps: f64, n: usize, beta: &BetaSchedule, gamma: &CapacitySequence, g: &RateFunction, c: f64) -> bool {
    let gn = gamma.get(n).unwrap_or(f64::INFINITY);
    g.eval(eps / beta.beta(n)) >= c * gn / n as f64
}

/// Smallest `N <= n_cap` with `beta_N g^{-1}(C gamma_N / N) <= eps`.
pub fn n_epsilon(
    eps: f64,
    beta: &BetaSchedule,
    gamma: &CapacitySequence,
    g: &RateFunction,
    c: f64,
    n_cap: usize,
) -> Result<Option<usize>, TheoryError> {
    if !(eps > 0.0 && c > 0.0) {
        return Err(TheoryError::Config(format!("need eps > 0 and C > 0, got {eps}, {c}")));
    }
    g.validate()?;
    beta.validate().map_err(|e| TheoryError::Config(e.to_string()))?;
    if n_cap > gamma.max_n() {
        return Err(TheoryError::Config(format!("capacity sequence covers N <= {}, cap is {n_cap}", gamma.max_n())));
    }
    Ok((1..=n_cap).find(|&n| n_epsilon_lhs(n, beta, gamma, g, c) <= eps))
}

/// One row of the crossing diagnostic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingRow {
    pub n: usize,
    pub gamma: f64,
    pub beta: f64,
    /// `ln(g(eps / beta_N) N / (C gamma_N))`; non-negative once the condition holds.
    pub value: f64,
}

pub fn log_crossing(eps: f64, beta: &BetaSchedule, gamma: &CapacitySequence, g: &RateFunction, c: f64, n_max: usize) -> Vec<CrossingRow> {
    (1..=n_max.min(gamma.max_n()))
        .map(|n| {
            let gn = gamma.values()[n];
            let b = beta.beta(n);
            CrossingRow { n, gamma: gn, beta: b, value: (g.eval(eps / b) * n as f64 / (c * gn)).ln() }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eta_values_and_shape() {
        assert_eq!(eta(1e-300, 1.0, 0.05), 0.0);
        let expected = LN_2 * (1.0 - 1.0 / (2.0 * C1 + 1.0).sqrt());
        assert_relative_eq!(eta(0.05, 0.0, 0.05), expected, epsilon = 1e-15);
        assert_relative_eq!(expected, 0.1927, epsilon = 1e-4);
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64 * 0.01).collect();
        for w in xs.windows(2) {
            assert!(eta(w[1], 1.0, 0.05) > eta(w[0], 1.0, 0.05));
            assert!(b_function(w[1], 1.0, 0.05, 3.0) >= b_function(w[0], 1.0, 0.05, 3.0));
        }
        assert!(eta(1e6, 1.0, 0.05) < LN_2);
    }

    #[test]
    fn b_picks_smaller_branch() {
        let (x, m, s, phi) = (0.01, 2.0, 0.05, 1.0);
        assert!(eta(x, m, s) < x / phi);
        assert_eq!(b_function(x, m, s, phi), eta(x, m, s));
        let x = 50.0;
        assert_eq!(b_function(x, 0.0, s, 10.0), eta(x, 0.0, s).min(x / 10.0));
    }

    #[test]
    fn inverse_round_trips() {
        let g = RateFunction::Eta { m: 1.0, noise_var: 0.05 };
        for y in [1e-6, 0.01, 0.3, 0.6] {
            let x = g.inverse(y);
            assert!(g.eval(x) >= y);
            assert!(g.eval(x * (1.0 - 1e-8)) < y);
        }
        assert!(g.inverse(LN_2).is_infinite());
    }

    #[test]
    fn constant_presets() {
        let c = CPreset::Exploration { noise_var: 0.05 }.value().unwrap();
        assert_relative_eq!(c, LN_2 / (0.05 * 21f64.ln()), epsilon = 1e-12);
        let c = CPreset::Optimization { noise_var: 0.05, phi: 10.0, beta: 2.0 }.value().unwrap();
        assert_relative_eq!(c, LN_2 / 0.05, epsilon = 1e-12);
        assert!(CPreset::Optimization { noise_var: 0.05, phi: 3.0, beta: 2.0 }.value().is_err());
    }

    #[test]
    fn gamma_first_step_and_monotone() {
        let grid: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.0]).collect();
        let gamma = empirical_gamma(&KernelSpec::isotropic(1, 0.2, 1.0), &grid, 0.05, 200).unwrap();
        assert_relative_eq!(gamma.values()[1], 0.5 * 21f64.ln(), epsilon = 1e-12);
        assert!(gamma.values().windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn repeated_point_adds_less() {
        let grid = vec![vec![0.0], vec![0.0]];
        let gamma = empirical_gamma(&KernelSpec::isotropic(1, 0.2, 1.0), &grid, 0.05, 2).unwrap();
        let v = gamma.values();
        assert!(v[2] - v[1] < v[1] - v[0]);
    }

    #[test]
    fn n_epsilon_is_minimal() {
        let gamma = CapacitySequence::new((0..=5000).map(|n| (1.0 + n as f64).ln()).collect()).unwrap();
        let beta = BetaSchedule::constant(2.0);
        let g = RateFunction::Eta { m: 0.5, noise_var: 0.05 };
        let c = CPreset::Exploration { noise_var: 0.05 }.value().unwrap();
        let n = n_epsilon(0.5, &beta, &gamma, &g, c, 5000).unwrap().expect("crossing within cap");
        assert!(n > 1);
        assert!(n_epsilon_holds(0.5, n, &beta, &gamma, &g, c));
        assert!(!n_epsilon_holds(0.5, n - 1, &beta, &gamma, &g, c));
        let rows = log_crossing(0.5, &beta, &gamma, &g, c, 5000);
        assert!(rows[n - 2].value < 0.0 && rows[n - 1].value >= 0.0);
    }

    #[test]
    fn huge_eps_gives_one() {
        let gamma = CapacitySequence::new(vec![0.0, 0.01, 0.02]).unwrap();
        let g = RateFunction::Eta { m: 0.0, noise_var: 0.05 };
        assert_eq!(n_epsilon(1e9, &BetaSchedule::constant(2.0), &gamma, &g, 1.0, 2).unwrap(), Some(1));
    }

    #[test]
    fn rejects_decreasing_capacity() {
        assert!(CapacitySequence::new(vec![0.0, 1.0, 0.5]).is_err());
        assert!(CapacitySequence::new(vec![0.5]).is_err());
    }
}
