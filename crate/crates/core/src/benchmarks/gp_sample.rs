use std::sync::Arc;

use crate::gp::{sample_prior_tensor_grid, ExtendedKernel, KernelSpec, NoiseModel};
use crate::math::mix_seed;
use crate::search::BoxDomain;

use super::{flood_fill, nearest_node, BenchmarkError, BenchmarkProblem};

/// Grid nodes per axis for sampled functions.
pub const GP_SAMPLE_RESOLUTION: usize = 150;
const LENGTHSCALE: f64 = 0.3;
const OUTPUTSCALE: f64 = 30.0;
const NOISE: f64 = 0.05;
/// Resampling attempts before giving up on a seed.
const MAX_RESAMPLES: u64 = 1000;

/// Values on a tensor grid, multilinearly interpolated in between.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl GridFunction {
    /// `values` is row-major with the last axis fastest.
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Self {
        assert_eq!(axes.iter().map(Vec::len).product::<usize>(), values.len());
        Self { axes, values }
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.axes.len();
        // Lower cell index and fractional offset per axis.
        let mut cell = Vec::with_capacity(d);
        for (axis, &v) in self.axes.iter().zip(x) {
            let n = axis.len();
            if n == 1 {
                cell.push((0, 0.0));
                continue;
            }
            let lo = axis[0];
            let step = (axis[n - 1] - lo) / (n - 1) as f64;
            let t = ((v - lo) / step).clamp(0.0, (n - 1) as f64);
            let i = (t.floor() as usize).min(n - 2);
            cell.push((i, t - i as f64));
        }
        let mut total = 0.0;
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut index = 0;
            for (k, &(i, frac)) in cell.iter().enumerate() {
                let up = (corner >> k) & 1 == 1 && self.axes[k].len() > 1;
                weight *= if up { frac } else { 1.0 - frac };
                index = index * self.axes[k].len() + i + usize::from(up);
            }
            if weight != 0.0 {
                total += weight * self.values[index];
            }
        }
        total
    }
}

/// Objective and constraint drawn from the prior on `[-1, 1]^2`.
///
/// Draws whose constraint is negative at the origin (or at its nearest grid
/// node) are rejected and redrawn with the next seed.
pub fn gp_sample_problem(seed: u64, same_function: bool) -> Result<BenchmarkProblem, BenchmarkError> {
    let domain = BoxDomain::cube(2, -1.0, 1.0);
    let kernel = KernelSpec::isotropic(2, LENGTHSCALE, OUTPUTSCALE);
    let axes = vec![domain.axis(0, GP_SAMPLE_RESOLUTION), domain.axis(1, GP_SAMPLE_RESOLUTION)];
    let x0 = vec![0.0, 0.0];
    let start = nearest_node(&domain, GP_SAMPLE_RESOLUTION, &x0);
    let draw = |s: u64| -> Result<GridFunction, BenchmarkError> {
        let values = sample_prior_tensor_grid(&kernel, &axes, s).map_err(|e| BenchmarkError::Setup(e.to_string()))?;
        Ok(GridFunction::new(axes.clone(), values))
    };

    for attempt in 0..MAX_RESAMPLES {
        let current = seed.wrapping_add(attempt);
        let s_grid = draw(mix_seed(current, 1))?;
        if s_grid.eval(&x0) < 0.0 || s_grid.values()[start] < 0.0 {
            log::info!("gp sample seed {current}: constraint negative at the origin, resampling");
            continue;
        }
        let f_grid = if same_function { s_grid.clone() } else { draw(mix_seed(current, 2))? };
        let reach = flood_fill(s_grid.values(), &[GP_SAMPLE_RESOLUTION; 2], start);
        let fstar = f_grid
            .values()
            .iter()
            .zip(&reach)
            .filter(|(_, r)| **r)
            .map(|(v, _)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        let s_fn = Arc::new(s_grid);
        let f_fn = Arc::new(f_grid);
        let name = if same_function { "gp2d_same" } else { "gp2d_indep" };
        let extended = if same_function {
            ExtendedKernel::shared(kernel.clone())
        } else {
            ExtendedKernel::independent(kernel.clone(), kernel.clone())
        };
        return BenchmarkProblem::new(
            name,
            domain,
            Arc::new(move |x: &[f64]| Ok(f_fn.eval(x))),
            Arc::new(move |x: &[f64]| Ok(s_fn.eval(x))),
            [NoiseModel::homoskedastic(NOISE), NoiseModel::homoskedastic(NOISE)],
            extended,
            x0,
            fstar,
            format!("flood fill of the {GP_SAMPLE_RESOLUTION}^2 sample grid from the origin (draw seed {current})"),
            same_function,
        );
    }
    Err(BenchmarkError::Setup(format!("no draw with a safe origin after {MAX_RESAMPLES} attempts from seed {seed}")))
}
