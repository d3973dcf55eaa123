//! Safe Bayesian optimization with information-theoretic exploration.

pub mod acquisition;
pub mod baselines;
pub mod benchmarks;
pub mod gp;
pub mod harness;
pub mod math;
pub mod safe_set;
pub mod search;
pub mod theory;
