use super::{Channel, ExtendedKernel, ExtendedPoint, GpError, NoiseModel, Observation};

/// Jitter schedule applied on factorization failure, relative to the outputscale.
const JITTER_START: f64 = 1e-10;
const JITTER_RETRIES: usize = 3;

/// Incrementally grown Cholesky factor of `K + diag(noise)` for one group of
/// mutually correlated observations.
#[derive(Clone, Debug, Default)]
struct Factor {
    /// Dataset indices of the observations in this group, in insertion order.
    members: Vec<usize>,
    /// Lower-triangular rows, packed: row `i` starts at `i * (i + 1) / 2`.
    chol: Vec<f64>,
    /// `L^{-1} y`.
    whitened: Vec<f64>,
}

impl Factor {
    fn len(&self) -> usize {
        self.members.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.chol[start..start + i + 1]
    }

    /// Solves `L v = k` in place.
    fn forward_solve(&self, k: &mut [f64]) {
        for i in 0..k.len() {
            let row = self.row(i);
            let mut acc = k[i];
            for (lij, vj) in row[..i].iter().zip(&k[..i]) {
                acc -= lij * vj;
            }
            k[i] = acc / row[i];
        }
    }
}

/// GP posterior over both channels.
///
/// Immutable in spirit: [`GaussianPosterior::condition`] returns a new value.
/// [`GaussianPosterior::push`] is the in-place variant used by the run loop.
#[derive(Clone, Debug)]
pub struct GaussianPosterior {
    kernel: ExtendedKernel,
    noise: [NoiseModel; 2],
    data: Vec<Observation>,
    groups: Vec<Factor>,
}

impl GaussianPosterior {
    pub fn new(kernel: ExtendedKernel, objective_noise: NoiseModel, constraint_noise: NoiseModel) -> Result<Self, GpError> {
        kernel.validate().map_err(GpError::Config)?;
        objective_noise.validate().map_err(GpError::Config)?;
        constraint_noise.validate().map_err(GpError::Config)?;
        let groups = if kernel.is_block_diagonal() { 2 } else { 1 };
        Ok(Self {
            kernel,
            noise: [objective_noise, constraint_noise],
            data: Vec::new(),
            groups: vec![Factor::default(); groups],
        })
    }

    /// Rebuilds a posterior from scratch by conditioning on every observation in order.
    pub fn from_dataset(
        kernel: ExtendedKernel,
        objective_noise: NoiseModel,
        constraint_noise: NoiseModel,
        data: impl IntoIterator<Item = Observation>,
    ) -> Result<Self, GpError> {
        let mut gp = Self::new(kernel, objective_noise, constraint_noise)?;
        for obs in data {
            gp.push(obs.point, obs.value, obs.noise_var)?;
        }
        Ok(gp)
    }

    pub fn kernel(&self) -> &ExtendedKernel {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn dataset(&self) -> &[Observation] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of observations on one channel.
    pub fn channel_len(&self, channel: Channel) -> usize {
        self.data.iter().filter(|o| o.point.channel == channel).count()
    }

    pub fn noise_model(&self, channel: Channel) -> &NoiseModel {
        &self.noise[channel.index()]
    }

    pub fn noise_variance(&self, channel: Channel, x: &[f64]) -> f64 {
        self.noise[channel.index()].variance(x)
    }

    fn group_of(&self, channel: Channel) -> usize {
        if self.groups.len() == 2 {
            channel.index()
        } else {
            0
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GpError> {
        if x.len() != self.dim() {
            return Err(GpError::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// Posterior conditioned on one more observation.
    pub fn condition(&self, point: ExtendedPoint, value: f64, noise_var: f64) -> Result<Self, GpError> {
        let mut next = self.clone();
        next.push(point, value, noise_var)?;
        Ok(next)
    }

    /// Conditions on an observation using the configured noise model.
    pub fn observe(&mut self, point: ExtendedPoint, value: f64) -> Result<(), GpError> {
        let noise = self.noise_variance(point.channel, &point.x);
        self.push(point, value, noise)
    }

    /// In-place conditioning; O(n^2) through a rank-one extension of the factor.
    pub fn push(&mut self, point: ExtendedPoint, value: f64, noise_var: f64) -> Result<(), GpError> {
        self.check_dim(&point.x)?;
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(GpError::NonPositiveNoise(noise_var));
        }
        let g = self.group_of(point.channel);
        let factor = &self.groups[g];
        let mut cross: Vec<f64> = factor
            .members
            .iter()
            .map(|&m| {
                let p = &self.data[m].point;
                self.kernel.eval_parts(p.channel, &p.x, point.channel, &point.x)
            })
            .collect();
        factor.forward_solve(&mut cross);
        let prior = self.kernel.eval_parts(point.channel, &point.x, point.channel, &point.x);
        let residual = prior + noise_var - cross.iter().map(|v| v * v).sum::<f64>();

        let scale = self.kernel.prior_variance(point.channel);
        let mut jitter = 0.0;
        let mut pivot = residual;
        let mut next = JITTER_START * scale;
        for _ in 0..JITTER_RETRIES {
            if pivot > 0.0 && pivot.is_finite() {
                break;
            }
            jitter = next;
            pivot = residual + jitter;
            next *= 10.0;
        }
        if !(pivot > 0.0 && pivot.is_finite()) {
            return Err(GpError::Factorization { jitter });
        }
        let diag = pivot.sqrt();
        let proj: f64 = cross.iter().zip(&factor.whitened).map(|(a, b)| a * b).sum();
        let white = (value - proj) / diag;

        let index = self.data.len();
        let factor = &mut self.groups[g];
        factor.chol.extend_from_slice(&cross);
        factor.chol.push(diag);
        factor.whitened.push(white);
        factor.members.push(index);
        self.data.push(Observation { point, value, noise_var, jitter });
        Ok(())
    }

    /// `L^{-1} k(D, p)` for the group that `p` belongs to.
    fn whiten(&self, channel: Channel, x: &[f64]) -> Vec<f64> {
        let factor = &self.groups[self.group_of(channel)];
        let mut k: Vec<f64> = factor
            .members
            .iter()
            .map(|&m| {
                let p = &self.data[m].point;
                self.kernel.eval_parts(p.channel, &p.x, channel, x)
            })
            .collect();
        factor.forward_solve(&mut k);
        k
    }

    /// Posterior mean and variance on one channel.
    pub fn mean_var_at(&self, channel: Channel, x: &[f64]) -> (f64, f64) {
        let v = self.whiten(channel, x);
        let factor = &self.groups[self.group_of(channel)];
        let mean = dot(&v, &factor.whitened);
        let prior = self.kernel.eval_channel(channel, x, x);
        let var = (prior - dot(&v, &v)).max(0.0);
        (mean, var)
    }

    pub fn mean_var(&self, p: &ExtendedPoint) -> (f64, f64) {
        self.mean_var_at(p.channel, &p.x)
    }

    pub fn covariance(&self, a: &ExtendedPoint, b: &ExtendedPoint) -> f64 {
        let prior = self.kernel.eval(a, b);
        if self.group_of(a.channel) != self.group_of(b.channel) {
            return prior;
        }
        let va = self.whiten(a.channel, &a.x);
        let vb = self.whiten(b.channel, &b.x);
        prior - dot(&va, &vb)
    }

    /// Linear correlation coefficient of the posterior at `a` and `b`, clamped to `[-1, 1]`.
    pub fn correlation(&self, a: &ExtendedPoint, b: &ExtendedPoint) -> Result<f64, GpError> {
        let (_, va) = self.mean_var(a);
        let (_, vb) = self.mean_var(b);
        if va <= 0.0 || vb <= 0.0 {
            return Err(GpError::DegenerateCorrelation);
        }
        let rho = self.covariance(a, b) / (va.sqrt() * vb.sqrt());
        Ok(rho.clamp(-1.0, 1.0))
    }

    /// `sigma_n^2(p) / (sigma_n^2(p) + sigma_nu^2(p))`.
    pub fn noise_correlation_factor(&self, p: &ExtendedPoint) -> f64 {
        let (_, var) = self.mean_var(p);
        let noise = self.noise_variance(p.channel, &p.x);
        var / (var + noise)
    }

    /// Posterior summaries for many points of one channel, sharing the
    /// whitened cross-covariances so pairwise covariances cost O(n).
    pub fn batch(&self, channel: Channel, points: &[Vec<f64>]) -> PosteriorBatch {
        let factor = &self.groups[self.group_of(channel)];
        let n = factor.len();
        let mut proj = Vec::with_capacity(points.len() * n);
        let mut means = Vec::with_capacity(points.len());
        let mut variances = Vec::with_capacity(points.len());
        for x in points {
            let v = self.whiten(channel, x);
            means.push(dot(&v, &factor.whitened));
            variances.push((self.kernel.eval_channel(channel, x, x) - dot(&v, &v)).max(0.0));
            proj.extend_from_slice(&v);
        }
        PosteriorBatch {
            kernel: self.kernel.clone(),
            channel,
            points: points.to_vec(),
            means,
            variances,
            proj,
            width: n,
        }
    }
}

/// Cached posterior quantities for a fixed list of points on one channel.
#[derive(Clone, Debug)]
pub struct PosteriorBatch {
    kernel: ExtendedKernel,
    channel: Channel,
    points: Vec<Vec<f64>>,
    means: Vec<f64>,
    variances: Vec<f64>,
    proj: Vec<f64>,
    width: usize,
}

impl PosteriorBatch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    fn proj(&self, i: usize) -> &[f64] {
        &self.proj[i * self.width..(i + 1) * self.width]
    }

    /// Posterior covariance between point `i` of `self` and point `j` of `other`.
    ///
    /// Both batches must come from the same posterior and channel.
    pub fn cross_covariance(&self, i: usize, other: &PosteriorBatch, j: usize) -> f64 {
        debug_assert_eq!(self.width, other.width);
        debug_assert_eq!(self.channel, other.channel);
        let prior = self.kernel.eval_channel(self.channel, &self.points[i], &other.points[j]);
        prior - dot(self.proj(i), other.proj(j))
    }

    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        self.cross_covariance(i, self, j)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelSpec;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gp1d(ls: f64, os: f64, noise: f64) -> GaussianPosterior {
        GaussianPosterior::new(
            ExtendedKernel::shared(KernelSpec::isotropic(1, ls, os)),
            NoiseModel::homoskedastic(noise),
            NoiseModel::homoskedastic(noise),
        )
        .unwrap()
    }

    #[test]
    fn empty_posterior_is_prior() {
        let gp = gp1d(0.5, 1.0, 0.05);
        assert_eq!(gp.mean_var(&ExtendedPoint::constraint(vec![0.3])), (0.0, 1.0));
    }

    #[test]
    fn single_observation_scalar_formula() {
        let mut gp = gp1d(0.5, 1.0, 0.05);
        gp.observe(ExtendedPoint::constraint(vec![0.0]), 1.0).unwrap();
        let (m, v) = gp.mean_var(&ExtendedPoint::constraint(vec![0.0]));
        assert_relative_eq!(m, 1.0 / 1.05, epsilon = 1e-14);
        assert_relative_eq!(v, 1.0 - 1.0 / 1.05, epsilon = 1e-14);
    }

    #[test]
    fn uncorrelated_query_is_untouched() {
        let mut gp = gp1d(0.1, 1.0, 0.05);
        gp.observe(ExtendedPoint::constraint(vec![0.0]), 1.0).unwrap();
        let (m, v) = gp.mean_var(&ExtendedPoint::constraint(vec![100.0]));
        assert_eq!(m, 0.0);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn correlation_examples() {
        let gp = gp1d(0.3, 2.0, 0.05);
        let a = ExtendedPoint::constraint(vec![0.0]);
        let b = ExtendedPoint::constraint(vec![0.3]);
        assert_relative_eq!(gp.correlation(&a, &a).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(gp.correlation(&a, &b).unwrap(), (-0.5f64).exp(), epsilon = 1e-14);
        let far = ExtendedPoint::constraint(vec![50.0]);
        assert_eq!(gp.correlation(&a, &far).unwrap(), 0.0);
        let other_channel = ExtendedPoint::objective(vec![0.0]);
        assert_eq!(gp.correlation(&a, &other_channel).unwrap(), 0.0);
    }

    #[test]
    fn noise_correlation_factor_ratio() {
        let gp = gp1d(0.3, 1.0, 0.05);
        let p = ExtendedPoint::constraint(vec![0.0]);
        assert_relative_eq!(gp.noise_correlation_factor(&p), 1.0 / 1.05, epsilon = 1e-15);
        let gp = gp1d(0.3, 1.0, 1.0);
        assert_relative_eq!(gp.noise_correlation_factor(&p), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn repeated_observation_shrinks_variance() {
        let p = ExtendedPoint::constraint(vec![0.2]);
        let gp = gp1d(0.3, 1.0, 0.05).condition(p.clone(), 0.4, 0.05).unwrap();
        let gp2 = gp.condition(p.clone(), 0.4, 0.05).unwrap();
        assert!(gp2.mean_var(&p).1 < gp.mean_var(&p).1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut gp = gp1d(0.3, 1.0, 0.05);
        assert_eq!(gp.push(ExtendedPoint::constraint(vec![0.0]), 1.0, 0.0), Err(GpError::NonPositiveNoise(0.0)));
        assert!(matches!(
            gp.push(ExtendedPoint::constraint(vec![0.0, 1.0]), 1.0, 0.1),
            Err(GpError::Dimension { .. })
        ));
    }

    /// Dense reference: `k^T (K + diag(noise))^{-1} y` with a full Cholesky solve.
    fn dense_reference(gp: &GaussianPosterior, p: &ExtendedPoint) -> (f64, f64) {
        let data = gp.dataset();
        let n = data.len();
        let k = gp.kernel();
        let gram = DMatrix::from_fn(n, n, |i, j| {
            k.eval(&data[i].point, &data[j].point) + if i == j { data[i].diagonal_noise() } else { 0.0 }
        });
        let chol = gram.cholesky().unwrap();
        let y = DVector::from_iterator(n, data.iter().map(|o| o.value));
        let kv = DVector::from_iterator(n, data.iter().map(|o| k.eval(&o.point, p)));
        let alpha = chol.solve(&y);
        let beta = chol.solve(&kv);
        (kv.dot(&alpha), k.eval(p, p) - kv.dot(&beta))
    }

    #[test]
    fn incremental_matches_dense_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let kernel = ExtendedKernel::independent(
            KernelSpec::rbf(vec![0.4, 0.7], 2.0),
            KernelSpec::rbf(vec![0.5, 0.5], 1.0),
        );
        let mut gp = GaussianPosterior::new(kernel, NoiseModel::homoskedastic(0.05), NoiseModel::homoskedastic(0.1)).unwrap();
        for i in 0..20 {
            let ch = if i % 3 == 0 { Channel::Objective } else { Channel::Constraint };
            let x = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            gp.observe(ExtendedPoint::new(x, ch), rng.random_range(-2.0..2.0)).unwrap();
        }
        for _ in 0..30 {
            let x = vec![rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2)];
            for ch in Channel::BOTH {
                let p = ExtendedPoint::new(x.clone(), ch);
                let (m, v) = gp.mean_var(&p);
                let (mr, vr) = dense_reference(&gp, &p);
                assert!((m - mr).abs() <= 1e-8 * (1.0 + mr.abs()), "{m} vs {mr}");
                assert!((v - vr).abs() <= 1e-8, "{v} vs {vr}");
            }
        }
    }

    #[test]
    fn coregionalized_couples_channels() {
        let kernel = ExtendedKernel::Coregionalized {
            base: KernelSpec::isotropic(1, 0.5, 1.0),
            coregion: [[1.0, 0.8], [0.8, 1.0]],
        };
        let mut gp = GaussianPosterior::new(kernel, NoiseModel::homoskedastic(0.01), NoiseModel::homoskedastic(0.01)).unwrap();
        gp.observe(ExtendedPoint::objective(vec![0.0]), 1.0).unwrap();
        let (m, v) = gp.mean_var(&ExtendedPoint::constraint(vec![0.0]));
        assert_relative_eq!(m, 0.8 / 1.01, epsilon = 1e-12);
        assert_relative_eq!(v, 1.0 - 0.64 / 1.01, epsilon = 1e-12);
        let (mr, vr) = dense_reference(&gp, &ExtendedPoint::constraint(vec![0.3]));
        let (m2, v2) = gp.mean_var(&ExtendedPoint::constraint(vec![0.3]));
        assert_relative_eq!(m2, mr, epsilon = 1e-12);
        assert_relative_eq!(v2, vr, epsilon = 1e-12);
    }

    #[test]
    fn batch_agrees_with_pointwise() {
        let mut gp = gp1d(0.3, 1.5, 0.05);
        for (x, y) in [(0.0, 0.5), (0.2, 0.7), (-0.4, -0.1)] {
            gp.observe(ExtendedPoint::constraint(vec![x]), y).unwrap();
        }
        let pts: Vec<Vec<f64>> = (0..7).map(|i| vec![-0.6 + 0.2 * i as f64]).collect();
        let batch = gp.batch(Channel::Constraint, &pts);
        for i in 0..pts.len() {
            let p = ExtendedPoint::constraint(pts[i].clone());
            let (m, v) = gp.mean_var(&p);
            assert_relative_eq!(batch.means()[i], m, epsilon = 1e-14);
            assert_relative_eq!(batch.variances()[i], v, epsilon = 1e-14);
            for j in 0..pts.len() {
                let q = ExtendedPoint::constraint(pts[j].clone());
                assert_relative_eq!(batch.covariance(i, j), gp.covariance(&p, &q), epsilon = 1e-14);
            }
        }
    }
}
