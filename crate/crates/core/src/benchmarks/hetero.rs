use std::sync::Arc;

use crate::gp::{ExtendedKernel, KernelSpec, NoiseModel};
use crate::search::BoxDomain;

use super::{BenchmarkError, BenchmarkProblem};

const HALF_WIDTH: f64 = 7.0;
const LOW_NOISE: f64 = 0.05;
const HIGH_NOISE: f64 = 0.5;

/// `1/2 e^-|x|^2 + sum_± e^-|x ± x1|^2 + 3 sum_± e^-|x ± x2|^2 + 0.2`
/// with `x1 = 2.7 e_1`, `x2 = 6 e_1`.
pub fn hetero_function(x: &[f64]) -> f64 {
    let rest: f64 = x[1..].iter().map(|v| v * v).sum();
    let sq = |shift: f64| (x[0] + shift) * (x[0] + shift) + rest;
    0.5 * (-sq(0.0)).exp()
        + (-sq(2.7)).exp()
        + (-sq(-2.7)).exp()
        + 3.0 * ((-sq(6.0)).exp() + (-sq(-6.0)).exp())
        + 0.2
}

/// Symmetric bump function in `d` dimensions with noise that is ten times
/// larger on the negative half of the first axis.
pub fn heteroskedastic_problem(d: usize) -> Result<BenchmarkProblem, BenchmarkError> {
    if !(d == 4 || d == 6) {
        return Err(BenchmarkError::Setup(format!("heteroskedastic problem needs d in {{4, 6}}, got {d}")));
    }
    // The maximum lies on the first axis; refine it with a dense scan there.
    let steps = 200_000;
    let fstar = (0..=steps)
        .map(|i| {
            let mut x = vec![0.0; d];
            x[0] = -HALF_WIDTH + 2.0 * HALF_WIDTH * i as f64 / steps as f64;
            hetero_function(&x)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let noise = NoiseModel::HalfSpace { axis: 0, threshold: 0.0, at_or_above: LOW_NOISE, below: HIGH_NOISE };
    let f: super::ScalarFn = Arc::new(|x: &[f64]| Ok(hetero_function(x)));
    BenchmarkProblem::new(
        format!("hetero{d}"),
        BoxDomain::cube(d, -HALF_WIDTH, HALF_WIDTH),
        f.clone(),
        f,
        [noise.clone(), noise],
        ExtendedKernel::shared(KernelSpec::isotropic(d, 1.6, 1.0)),
        vec![0.0; d],
        fstar,
        "dense scan along the first axis; the function is positive on the whole box",
        true,
    )
}
