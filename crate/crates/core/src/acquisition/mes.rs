use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gp::{Channel, GaussianPosterior};
use crate::math::{gauss_legendre, ln_normal_cdf, normal_cdf, normal_pdf};

use super::AcquisitionError;

/// One sampled value of the maximum of `f` over the safe candidates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxValueSample {
    pub ystar: f64,
}

/// Noiseless single-sample max-value entropy search:
/// `theta psi(theta) / (2 Psi(theta)) - ln Psi(theta)` with `theta = (y* - mu) / sigma`.
pub fn alpha_mes(mu: f64, sigma: f64, ystar: f64) -> f64 {
    if sigma <= 1e-12 {
        return 0.0;
    }
    let theta = (ystar - mu) / sigma;
    mes_noiseless_theta(theta)
}

fn mes_noiseless_theta(theta: f64) -> f64 {
    let ln_cdf = ln_normal_cdf(theta);
    // psi / Psi through logs so the lower tail does not divide 0 by 0.
    let ratio = (normal_pdf(theta).ln() - ln_cdf).exp();
    (0.5 * theta * ratio - ln_cdf).max(0.0)
}

/// Single-sample max-value entropy search for a noisy observation `y = f(x) + nu`.
///
/// Information carried by `y` about the event `f(x) <= y*`:
/// `rho^2 theta psi/(2 Psi) + E_p[ln Psi(gamma(t))] - ln Psi(theta)` where
/// `rho^2 = sigma^2 / (sigma^2 + noise_var)`, `gamma(t) = (theta - rho t) / sqrt(1 - rho^2)`
/// and `p(t) = psi(t) Psi(gamma(t)) / Psi(theta)` is the standardized observation
/// density given the event. Tends to [`alpha_mes`] as `noise_var -> 0` and never
/// exceeds `ln(1 + sigma^2 / noise_var) / 2`.
pub fn alpha_mes_noisy(mu: f64, sigma: f64, noise_var: f64, ystar: f64) -> f64 {
    if sigma <= 1e-12 {
        return 0.0;
    }
    let theta = (ystar - mu) / sigma;
    let var = sigma * sigma;
    let rho2 = var / (var + noise_var);
    if rho2 >= 1.0 {
        return mes_noiseless_theta(theta);
    }
    let rho = rho2.sqrt();
    let s = (1.0 - rho2).sqrt();
    let ln_cdf_theta = ln_normal_cdf(theta);
    let ratio = (normal_pdf(theta).ln() - ln_cdf_theta).exp();

    let expectation = truncated_expectation(theta, rho, s, ln_cdf_theta);
    let mi = 0.5 * rho2 * theta * ratio + expectation - ln_cdf_theta;
    mi.max(0.0)
}

/// `E_p[ln Psi(gamma(t))]` by composite Gauss-Legendre quadrature.
fn truncated_expectation(theta: f64, rho: f64, s: f64, ln_cdf_theta: f64) -> f64 {
    thread_local! {
        static RULE: (Vec<f64>, Vec<f64>) = gauss_legendre(10);
    }
    // Kink of Psi(gamma(t)) sits at t* = theta / rho with width s / rho.
    let t_star = theta / rho;
    let width = s / rho;
    // The conditional law of t has mean -rho psi/Psi and unit-order spread.
    let mean = -rho * (normal_pdf(theta).ln() - ln_cdf_theta).exp();
    let lo = (mean - 12.0).min(-12.0);
    let hi = (mean + 12.0).max(12.0).min(t_star + 12.0 * width);
    if hi <= lo {
        return 0.0;
    }
    let mut cuts = vec![lo, hi];
    for k in [-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0] {
        cuts.push(t_star + k * width);
        cuts.push(mean + k);
    }
    cuts.retain(|c| *c >= lo && *c <= hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();

    let near = |t: f64| (t - t_star).abs() <= 8.0 * width;
    RULE.with(|(nodes, weights)| {
        let mut total = 0.0;
        for pair in cuts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let mid = 0.5 * (a + b);
            let step = if near(mid) { (2.0 * width).clamp(1e-6, 1.5) } else { 4.0 };
            let pieces = (((b - a) / step).ceil() as usize).clamp(1, 400);
            let h = (b - a) / pieces as f64;
            for i in 0..pieces {
                let c = a + h * (i as f64 + 0.5);
                for (x, w) in nodes.iter().zip(weights) {
                    let t = c + 0.5 * h * x;
                    let ln_g = ln_normal_cdf((theta - rho * t) / s);
                    let ln_p = -0.5 * t * t - 0.918_938_533_204_672_7 + ln_g - ln_cdf_theta;
                    total += 0.5 * h * w * ln_p.exp() * ln_g;
                }
            }
        }
        total
    })
}

/// `sigma^2 / (phi - mu)^2`, the surrogate whose argmax matches [`alpha_mes`] with `y* = phi`.
pub fn alpha_mes_hat(mu: f64, sigma: f64, phi: f64) -> Result<f64, AcquisitionError> {
    if !(phi > mu) {
        return Err(AcquisitionError::Precondition(format!("phi = {phi} must exceed the posterior mean {mu}")));
    }
    let d = phi - mu;
    Ok(sigma * sigma / (d * d))
}

/// Samples `y*` from a Gumbel fit to `P(max f <= y) = prod_i Phi((y - mu_i) / sigma_i)`
/// over `candidates` on the objective channel.
pub fn sample_max_value(
    gp: &GaussianPosterior,
    candidates: &[Vec<f64>],
    seed: u64,
) -> Result<MaxValueSample, AcquisitionError> {
    if candidates.is_empty() {
        return Err(AcquisitionError::EmptyCandidates);
    }
    let batch = gp.batch(Channel::Objective, candidates);
    let sigmas: Vec<f64> = batch.variances().iter().map(|v| v.sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(MaxValueSample { ystar: gumbel_max_sample(batch.means(), &sigmas, rng.random::<f64>()) })
}

/// Gumbel-approximated draw of `max_i N(mu_i, sigma_i^2)` at uniform variate `u`.
pub fn gumbel_max_sample(means: &[f64], sigmas: &[f64], u: f64) -> f64 {
    let max_mu = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_sigma = sigmas.iter().copied().fold(0.0, f64::max);
    let floor = max_mu + 1e-8 * (1.0 + max_mu.abs());
    if max_sigma <= 1e-12 {
        return floor;
    }
    // Every quantile at or above 0.25 lies above this bound; points far below it
    // change ln P(max <= y) by less than 1e-16 each and are dropped.
    let lower = means
        .iter()
        .zip(sigmas)
        .map(|(m, s)| m - 0.675 * s)
        .fold(f64::NEG_INFINITY, f64::max);
    let (means, sigmas): (Vec<f64>, Vec<f64>) =
        means.iter().zip(sigmas).filter(|(m, s)| *m + 8.5 * *s >= lower).map(|(m, s)| (*m, *s)).unzip();
    let ln_cdf = |y: f64| -> f64 {
        means
            .iter()
            .zip(&sigmas)
            .map(|(m, s)| {
                if *s <= 1e-12 {
                    if y >= *m {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    ln_normal_cdf((y - m) / s)
                }
            })
            .sum::<f64>()
    };
    let quantile = |q: f64| -> f64 {
        let target = q.ln();
        let mut lo = lower;
        let mut hi = max_mu + 10.0 * max_sigma;
        while ln_cdf(lo) > target {
            lo -= 5.0 * max_sigma;
        }
        while hi - lo > 1e-9 * max_sigma {
            let mid = 0.5 * (lo + hi);
            if ln_cdf(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let (q25, q50, q75) = (quantile(0.25), quantile(0.5), quantile(0.75));
    let scale = (q75 - q25) / ((-(0.25f64).ln()).ln() - (-(0.75f64).ln()).ln());
    let location = q50 + scale * (-(0.5f64).ln()).ln();
    let u = u.clamp(1e-12, 1.0 - 1e-12);
    let y = location - scale * (-u.ln()).ln();
    y.max(floor)
}

/// `prod_i Phi((y - mu_i) / sigma_i)`.
pub fn max_value_cdf(means: &[f64], sigmas: &[f64], y: f64) -> f64 {
    means.iter().zip(sigmas).map(|(m, s)| normal_cdf((y - m) / s)).product()
}
