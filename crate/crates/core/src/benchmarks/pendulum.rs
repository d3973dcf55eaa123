use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::gp::{ExtendedKernel, KernelSpec, NoiseModel};
use crate::search::BoxDomain;

use super::{BenchmarkError, BenchmarkProblem};

/// Inverted pendulum with a linear state-feedback controller `u = x1 theta + x2 theta_dot`.
///
/// Gym-style semi-implicit Euler step with torque and speed clipping;
/// `theta = 0` is upright.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PendulumConfig {
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
    pub dt: f64,
    pub max_torque: f64,
    pub max_speed: f64,
    pub steps: usize,
    pub theta0: f64,
    /// Largest admissible angular speed.
    pub speed_limit: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub x0: Vec<f64>,
    /// Grid nodes per axis for the reference optimum.
    pub reference_resolution: usize,
}

impl Default for PendulumConfig {
    fn default() -> Self {
        Self {
            gravity: 10.0,
            mass: 1.0,
            length: 1.0,
            dt: 0.05,
            max_torque: 2.0,
            max_speed: 8.0,
            steps: 400,
            theta0: 0.05,
            speed_limit: 0.5,
            lower: vec![-8.0, -3.0],
            upper: vec![-3.0, 2.0],
            x0: vec![-6.5, -1.5],
            reference_resolution: 100,
        }
    }
}

/// Largest `|theta_dot|` over one episode.
pub fn simulate_pendulum(cfg: &PendulumConfig, gains: &[f64]) -> Result<f64, BenchmarkError> {
    let (mut theta, mut speed) = (cfg.theta0, 0.0f64);
    let mut peak = 0.0f64;
    let drift = 3.0 * cfg.gravity / (2.0 * cfg.length);
    let gain = 3.0 / (cfg.mass * cfg.length * cfg.length);
    for _ in 0..cfg.steps {
        let u = (gains[0] * theta + gains[1] * speed).clamp(-cfg.max_torque, cfg.max_torque);
        speed = (speed + (drift * theta.sin() + gain * u) * cfg.dt).clamp(-cfg.max_speed, cfg.max_speed);
        theta += speed * cfg.dt;
        if !(theta.is_finite() && speed.is_finite()) {
            return Err(BenchmarkError::Simulation { params: gains.to_vec() });
        }
        peak = peak.max(speed.abs());
    }
    Ok(peak)
}

/// Controller tuning task: both channels equal `speed_limit - max_t |theta_dot_t|`.
pub fn pendulum_problem(cfg: &PendulumConfig) -> Result<BenchmarkProblem, BenchmarkError> {
    let domain = BoxDomain::new(cfg.lower.clone(), cfg.upper.clone());
    domain.validate().map_err(BenchmarkError::Setup)?;
    let shared = Arc::new(cfg.clone());
    let f: super::ScalarFn = Arc::new(move |x: &[f64]| Ok(shared.speed_limit - simulate_pendulum(&shared, x)?));

    let res = cfg.reference_resolution;
    let grid = domain.grid(res);
    let values = grid.iter().map(|x| f(x)).collect::<Result<Vec<_>, _>>()?;
    let reach = super::flood_fill(&values, &[res, res], super::nearest_node(&domain, res, &cfg.x0));
    let fstar = values.iter().zip(&reach).filter(|(_, r)| **r).map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);

    BenchmarkProblem::new(
        "pendulum",
        domain,
        f.clone(),
        f,
        [NoiseModel::homoskedastic(0.04), NoiseModel::homoskedastic(0.04)],
        ExtendedKernel::shared(KernelSpec::isotropic(2, 1.3, 6.6)),
        cfg.x0.clone(),
        fstar,
        format!("flood fill of a {res}^2 grid of simulated episodes"),
        true,
    )
}
