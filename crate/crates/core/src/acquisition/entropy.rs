use std::f64::consts::{LN_2, PI};

use crate::gp::{Channel, GaussianPosterior};
use crate::math::normal_cdf;

use super::AcquisitionError;

/// `c1 = 1 / (pi ln 2)`
pub const C1: f64 = 1.0 / (PI * LN_2);
/// `c2 = 2 c1 - 1`
pub const C2: f64 = 2.0 * C1 - 1.0;

/// Mutual-information values below this are treated as zero.
pub const MI_CLAMP: f64 = 1e-14;

/// Probability that the constraint is negative at a point with posterior `N(mu, sigma^2)`.
pub fn unsafe_prob(mu: f64, sigma: f64) -> Result<f64, AcquisitionError> {
    if !(sigma > 0.0) {
        return Err(AcquisitionError::Degenerate(format!("standard deviation must be positive, got {sigma}")));
    }
    Ok(normal_cdf(-mu / sigma))
}

/// Binary entropy (nats) of the safety indicator.
pub fn exact_entropy(mu: f64, sigma: f64) -> Result<f64, AcquisitionError> {
    let p = unsafe_prob(mu, sigma)?;
    let term = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    Ok(term(p) + term(1.0 - p))
}

/// Gaussian-shaped approximation `ln 2 exp(-c1 (mu / sigma)^2)` of [`exact_entropy`].
pub fn approx_entropy(mu: f64, sigma: f64) -> Result<f64, AcquisitionError> {
    if !(sigma > 0.0) {
        return Err(AcquisitionError::Degenerate(format!("standard deviation must be positive, got {sigma}")));
    }
    let r = mu / sigma;
    Ok(LN_2 * (-C1 * r * r).exp())
}

/// Posterior quantities entering the information gain of measuring at `x` about
/// the safety of `z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MiQuery {
    pub mu_z: f64,
    pub sigma_z: f64,
    pub sigma_x: f64,
    /// Posterior correlation between the constraint at `x` and at `z`.
    pub rho: f64,
    /// Observation noise variance at `x`.
    pub noise_var: f64,
}

impl MiQuery {
    /// Reads the constraint-channel posterior at `x` and `z`.
    pub fn from_posterior(gp: &GaussianPosterior, x: &[f64], z: &[f64]) -> Self {
        use crate::gp::ExtendedPoint;
        let px = ExtendedPoint::constraint(x.to_vec());
        let pz = ExtendedPoint::constraint(z.to_vec());
        let (_, vx) = gp.mean_var(&px);
        let (mu_z, vz) = gp.mean_var(&pz);
        let rho = gp.correlation(&px, &pz).unwrap_or(0.0);
        Self { mu_z, sigma_z: vz.sqrt(), sigma_x: vx.sqrt(), rho, noise_var: gp.noise_variance(Channel::Constraint, x) }
    }
}

/// Expected approximate entropy of `Psi(z)` after one noisy measurement at `x`.
pub fn expected_post_entropy(q: &MiQuery) -> Result<f64, AcquisitionError> {
    if !(q.noise_var > 0.0) {
        return Err(AcquisitionError::Degenerate(format!("noise variance must be positive, got {}", q.noise_var)));
    }
    if !(q.sigma_z > 0.0) {
        return Ok(0.0);
    }
    Ok(expected_post_entropy_raw(q.mu_z * q.mu_z / (q.sigma_z * q.sigma_z), q.sigma_x * q.sigma_x, q.rho, q.noise_var))
}

/// Same as [`expected_post_entropy`] from the squared standardized mean `r2 = mu_z^2 / sigma_z^2`.
#[inline]
pub(crate) fn expected_post_entropy_raw(r2: f64, var_x: f64, rho: f64, noise_var: f64) -> f64 {
    let rho2 = (rho * rho).min(1.0);
    let denom = noise_var + var_x * (1.0 + C2 * rho2);
    let prefactor = ((noise_var + var_x * (1.0 - rho2)) / denom).sqrt();
    let exponent = -C1 * r2 * (noise_var + var_x) / denom;
    LN_2 * prefactor * exponent.exp()
}

/// Approximate mutual information between a measurement at `x` and `Psi(z)`.
pub fn ise_mutual_info(q: &MiQuery) -> Result<f64, AcquisitionError> {
    let post = expected_post_entropy(q)?;
    if !(q.sigma_z > 0.0) {
        return Ok(0.0);
    }
    Ok(clamp_mi(approx_entropy(q.mu_z, q.sigma_z)? - post))
}

#[inline]
pub(crate) fn ise_mutual_info_raw(r2: f64, var_x: f64, rho: f64, noise_var: f64) -> f64 {
    let prior = LN_2 * (-C1 * r2).exp();
    clamp_mi(prior - expected_post_entropy_raw(r2, var_x, rho, noise_var))
}

#[inline]
fn clamp_mi(v: f64) -> f64 {
    if v.abs() < MI_CLAMP {
        0.0
    } else {
        v
    }
}

/// Upper bound `ln 2 sigma_x^2 / sigma_nu^2` on the information gain of measuring at `x`.
pub fn ise_upper_bound(var_x: f64, noise_var: f64) -> f64 {
    LN_2 * var_x / noise_var
}
