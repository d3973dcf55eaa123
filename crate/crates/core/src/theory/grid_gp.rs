use crate::gp::KernelSpec;

/// Zero-mean GP restricted to a finite grid, conditioned one observation at a
/// time through low-rank covariance updates.
#[derive(Clone, Debug)]
pub struct GridGp {
    kernel: KernelSpec,
    grid: Vec<Vec<f64>>,
    noise_var: f64,
    mean: Vec<f64>,
    var: Vec<f64>,
    /// Columns `k_{m-1}(., x_m) / sqrt(v_m + s2)` of past updates.
    factors: Vec<Vec<f64>>,
}

impl GridGp {
    pub fn new(kernel: KernelSpec, grid: Vec<Vec<f64>>, noise_var: f64) -> Self {
        let var = grid.iter().map(|x| kernel.eval(x, x)).collect();
        Self { mean: vec![0.0; grid.len()], var, kernel, grid, noise_var, factors: Vec::new() }
    }

    pub fn grid(&self) -> &[Vec<f64>] {
        &self.grid
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    pub fn variances(&self) -> &[f64] {
        &self.var
    }

    pub fn observations(&self) -> usize {
        self.factors.len()
    }

    /// Conditions on `y` observed at grid node `j`.
    pub fn observe(&mut self, j: usize, y: f64) {
        let xj = &self.grid[j];
        let mut cov: Vec<f64> = self.grid.iter().map(|x| self.kernel.eval(x, xj)).collect();
        for f in &self.factors {
            let fj = f[j];
            for (c, fi) in cov.iter_mut().zip(f) {
                *c -= fi * fj;
            }
        }
        let denom = self.var[j].max(0.0) + self.noise_var;
        let scale = denom.sqrt();
        let residual = y - self.mean[j];
        for i in 0..cov.len() {
            self.mean[i] += cov[i] * residual / denom;
            self.var[i] = (self.var[i] - cov[i] * cov[i] / denom).max(0.0);
        }
        self.factors.push(cov.into_iter().map(|c| c / scale).collect());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{ExtendedKernel, ExtendedPoint, GaussianPosterior, NoiseModel, Channel};

    #[test]
    fn matches_full_posterior() {
        let kernel = KernelSpec::isotropic(1, 0.3, 2.0);
        let grid: Vec<Vec<f64>> = (0..21).map(|i| vec![i as f64 / 20.0]).collect();
        let mut small = GridGp::new(kernel.clone(), grid.clone(), 0.05);
        let mut full = GaussianPosterior::new(
            ExtendedKernel::shared(kernel),
            NoiseModel::homoskedastic(0.05),
            NoiseModel::homoskedastic(0.05),
        )
        .unwrap();
        for (j, y) in [(3, 0.4), (10, -1.0), (3, 0.6), (17, 2.0)] {
            small.observe(j, y);
            full.observe(ExtendedPoint::constraint(grid[j].clone()), y).unwrap();
        }
        for (i, x) in grid.iter().enumerate() {
            let (m, v) = full.mean_var_at(Channel::Constraint, x);
            assert!((small.means()[i] - m).abs() < 1e-9);
            assert!((small.variances()[i] - v).abs() < 1e-9);
        }
    }
}
