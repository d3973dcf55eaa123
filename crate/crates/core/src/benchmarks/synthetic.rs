use std::sync::Arc;

use crate::gp::{ExtendedKernel, KernelSpec, NoiseModel};
use crate::search::BoxDomain;

use super::{flood_fill, nearest_node, BenchmarkError, BenchmarkProblem};

const LOWER: f64 = -2.4;
const UPPER: f64 = 10.5;
const SCAN_POINTS: usize = 100_000;

/// `e^-x + 15 e^-(x-4)^2 + 3 e^-(x-7)^2 + 18 e^-(x-10)^2 + 0.41`
pub fn synthetic_1d_function(x: f64) -> f64 {
    let bump = |c: f64| (-(x - c) * (x - c)).exp();
    (-x).exp() + 15.0 * bump(4.0) + 3.0 * bump(7.0) + 18.0 * bump(10.0) + 0.41
}

/// One-dimensional problem whose objective doubles as the constraint.
pub fn synthetic_1d() -> Result<BenchmarkProblem, BenchmarkError> {
    let domain = BoxDomain::new(vec![LOWER], vec![UPPER]);
    let grid = domain.axis(0, SCAN_POINTS);
    let values: Vec<f64> = grid.iter().map(|x| synthetic_1d_function(*x)).collect();
    let reach = flood_fill(&values, &[SCAN_POINTS], nearest_node(&domain, SCAN_POINTS, &[0.0]));
    let fstar = values.iter().zip(&reach).filter(|(_, r)| **r).map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);

    let f: super::ScalarFn = Arc::new(|x: &[f64]| Ok(synthetic_1d_function(x[0])));
    BenchmarkProblem::new(
        "synthetic1d",
        domain,
        f.clone(),
        f,
        [NoiseModel::homoskedastic(0.05), NoiseModel::homoskedastic(0.05)],
        ExtendedKernel::shared(KernelSpec::isotropic(1, 0.6, 50.0)),
        vec![0.0],
        fstar,
        format!("{SCAN_POINTS}-point scan of the safe component containing x0"),
        true,
    )
}
