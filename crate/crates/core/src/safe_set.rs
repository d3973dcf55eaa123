//! High-probability safe region: confidence scaling and the monotone archive of
//! certified parameters.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gp::{Channel, GaussianPosterior};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SafeSetError {
    #[error("invalid beta schedule: {0}")]
    Config(String),
    #[error("cannot certify {x:?}: lower confidence bound {lcb} is negative at iteration {n}")]
    NotCertifiable { x: Vec<f64>, lcb: f64, n: usize },
}

/// Confidence multiplier `beta_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BetaSchedule {
    Constant {
        beta: f64,
    },
    /// `B + R sqrt(2 (ln(e / delta) + gamma_n))`.
    ///
    /// `rkhs_bound` holds one norm bound per channel (objective, constraint).
    Theoretical {
        rkhs_bound: [f64; 2],
        subgaussian: f64,
        delta: f64,
        /// `gamma[n]` for `n = 0, 1, ...`; the last entry is reused past the end.
        gamma: Vec<f64>,
    },
}

impl BetaSchedule {
    pub fn constant(beta: f64) -> Self {
        Self::Constant { beta }
    }

    pub fn validate(&self) -> Result<(), SafeSetError> {
        match self {
            Self::Constant { beta } if !(*beta > 0.0 && beta.is_finite()) => {
                Err(SafeSetError::Config(format!("beta must be positive, got {beta}")))
            }
            Self::Theoretical { delta, .. } if !(*delta > 0.0 && *delta < 1.0) => {
                Err(SafeSetError::Config(format!("delta must lie in (0, 1), got {delta}")))
            }
            Self::Theoretical { rkhs_bound, subgaussian, gamma, .. } => {
                if rkhs_bound.iter().any(|b| *b < 0.0) || *subgaussian <= 0.0 {
                    return Err(SafeSetError::Config("RKHS and noise bounds must be positive".into()));
                }
                if gamma.windows(2).any(|w| w[1] < w[0]) || gamma.iter().any(|g| *g < 0.0) {
                    return Err(SafeSetError::Config("gamma sequence must be non-negative and non-decreasing".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `beta_n` for the constraint channel.
    pub fn beta(&self, n: usize) -> f64 {
        self.beta_for(n, Channel::Constraint)
    }

    pub fn beta_for(&self, n: usize, channel: Channel) -> f64 {
        match self {
            Self::Constant { beta } => *beta,
            Self::Theoretical { rkhs_bound, subgaussian, delta, gamma } => {
                let g = match gamma.get(n) {
                    Some(g) => *g,
                    None => gamma.last().copied().unwrap_or(0.0),
                };
                let log_term = 1.0 - delta.ln();
                rkhs_bound[channel.index()] + subgaussian * (2.0 * (log_term + g)).sqrt()
            }
        }
    }
}

fn key(x: &[f64]) -> Vec<u64> {
    // Normalize -0.0 so that both zeros share a key.
    x.iter().map(|v| if *v == 0.0 { 0 } else { v.to_bits() }).collect()
}

/// Safe seed plus every point certified safe so far.
#[derive(Clone, Debug)]
pub struct SafeRegion {
    beta: BetaSchedule,
    seed: Vec<f64>,
    archive: HashSet<Vec<u64>>,
    order: Vec<Vec<f64>>,
}

impl SafeRegion {
    pub fn new(beta: BetaSchedule, seed: Vec<f64>) -> Result<Self, SafeSetError> {
        beta.validate()?;
        let mut region = Self { beta, seed: seed.clone(), archive: HashSet::new(), order: Vec::new() };
        region.insert(seed);
        Ok(region)
    }

    pub fn beta_schedule(&self) -> &BetaSchedule {
        &self.beta
    }

    pub fn beta(&self, n: usize) -> f64 {
        self.beta.beta(n)
    }

    pub fn seed(&self) -> &[f64] {
        &self.seed
    }

    /// Certified points in insertion order, starting with the safe seed.
    pub fn archive(&self) -> &[Vec<f64>] {
        &self.order
    }

    pub fn archive_len(&self) -> usize {
        self.order.len()
    }

    pub fn in_archive(&self, x: &[f64]) -> bool {
        self.archive.contains(&key(x))
    }

    /// `mu - beta_n sigma` of the constraint.
    pub fn lcb(&self, gp: &GaussianPosterior, x: &[f64], n: usize) -> f64 {
        let (m, v) = gp.mean_var_at(Channel::Constraint, x);
        m - self.beta(n) * v.sqrt()
    }

    pub fn lcb_passes(&self, gp: &GaussianPosterior, x: &[f64], n: usize) -> bool {
        self.lcb(gp, x, n) >= 0.0
    }

    pub fn is_safe(&self, gp: &GaussianPosterior, x: &[f64], n: usize) -> bool {
        self.in_archive(x) || self.lcb_passes(gp, x, n)
    }

    /// Adds `x` to the archive; fails unless it is currently safe.
    pub fn certify(&mut self, gp: &GaussianPosterior, x: &[f64], n: usize) -> Result<(), SafeSetError> {
        if self.in_archive(x) {
            return Ok(());
        }
        let lcb = self.lcb(gp, x, n);
        if lcb < 0.0 {
            return Err(SafeSetError::NotCertifiable { x: x.to_vec(), lcb, n });
        }
        self.insert(x.to_vec());
        Ok(())
    }

    /// Certifies every point of `probes` whose lower bound currently passes.
    /// Returns how many new points entered the archive.
    pub fn certify_passing(&mut self, gp: &GaussianPosterior, probes: &[Vec<f64>], n: usize) -> usize {
        let before = self.order.len();
        for x in probes {
            if !self.in_archive(x) && self.lcb_passes(gp, x, n) {
                self.insert(x.clone());
            }
        }
        self.order.len() - before
    }

    fn insert(&mut self, x: Vec<f64>) {
        if self.archive.insert(key(&x)) {
            self.order.push(x);
        }
    }
}

/// `true` when the true constraint value marks a safety violation.
pub fn is_violation(s_value: f64) -> bool {
    s_value < 0.0
}
