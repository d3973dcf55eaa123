use std::cmp::Ordering;

use crate::gp::{Channel, GaussianPosterior};
use crate::search::{lex_cmp, JointBest, JointObjective, TopK};

use super::entropy::{ise_mutual_info_raw, ise_upper_bound, MiQuery, ise_mutual_info, C1};
use super::mes::{alpha_mes_hat, alpha_mes_noisy};

/// Objective-channel term competing with the safe-exploration information gain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SecondTerm {
    None,
    /// Weighted noise-aware max-value entropy search with sampled `y*`.
    Mes { ystar: f64, weight: f64 },
    /// Weighted surrogate `sigma^2 / (phi - mu)^2`.
    MesHat { phi: f64, weight: f64 },
}

impl SecondTerm {
    /// Unweighted value at one objective-channel posterior.
    pub fn raw(&self, mu: f64, var: f64, noise_var: f64) -> f64 {
        match *self {
            Self::None => f64::NEG_INFINITY,
            Self::Mes { ystar, .. } => alpha_mes_noisy(mu, var.sqrt(), noise_var, ystar),
            Self::MesHat { phi, .. } => {
                // phi is validated against the candidate means by the caller; guard the division anyway.
                alpha_mes_hat(mu.min(phi - 1e-12), var.sqrt(), phi).unwrap_or(f64::INFINITY)
            }
        }
    }

    pub fn weighted(&self, mu: f64, var: f64, noise_var: f64) -> f64 {
        match *self {
            Self::None => f64::NEG_INFINITY,
            Self::Mes { weight, .. } | Self::MesHat { weight, .. } => weight * self.raw(mu, var, noise_var),
        }
    }
}

/// `max(max_z I(x, z), second(x))` over measurement `x` and target `z`.
pub struct IseObjective<'a> {
    gp: &'a GaussianPosterior,
    second: SecondTerm,
}

impl<'a> IseObjective<'a> {
    pub fn new(gp: &'a GaussianPosterior, second: SecondTerm) -> Self {
        Self { gp, second }
    }

    /// Approximate information gain about `Psi(z)` from measuring the constraint at `x`.
    pub fn information(&self, x: &[f64], z: &[f64]) -> f64 {
        ise_mutual_info(&MiQuery::from_posterior(self.gp, x, z)).unwrap_or(0.0)
    }

    pub fn second_at(&self, x: &[f64]) -> f64 {
        let (m, v) = self.gp.mean_var_at(Channel::Objective, x);
        self.second.weighted(m, v, self.gp.noise_variance(Channel::Objective, x))
    }

    /// Best target and information gain for a single `x` over `zs`.
    pub fn alpha_ise(&self, x: &[f64], zs: &[Vec<f64>]) -> (f64, usize) {
        let best = self.scan_inner(&[x.to_vec()], zs, 1, false);
        best.first().map_or((0.0, 0), |b| (b.value, b.z_index))
    }

    fn scan_inner(&self, xs: &[Vec<f64>], zs: &[Vec<f64>], keep: usize, with_second: bool) -> Vec<JointBest> {
        let bx = self.gp.batch(Channel::Constraint, xs);
        let bz = self.gp.batch(Channel::Constraint, zs);
        let second: Vec<f64> = if with_second && self.second != SecondTerm::None {
            let bf = self.gp.batch(Channel::Objective, xs);
            xs.iter()
                .enumerate()
                .map(|(i, x)| {
                    let noise = self.gp.noise_variance(Channel::Objective, x);
                    self.second.weighted(bf.means()[i], bf.variances()[i], noise)
                })
                .collect()
        } else {
            vec![f64::NEG_INFINITY; xs.len()]
        };

        // Standardized squared means and prior entropies of the targets, most uncertain first.
        let r2: Vec<f64> = bz
            .means()
            .iter()
            .zip(bz.variances())
            .map(|(m, v)| if *v > 0.0 { m * m / v } else { f64::INFINITY })
            .collect();
        let entropy: Vec<f64> = r2.iter().map(|r| std::f64::consts::LN_2 * (-C1 * r).exp()).collect();
        let mut order: Vec<usize> = (0..zs.len()).filter(|&j| entropy[j] > 0.0).collect();
        order.sort_by(|&a, &b| entropy[b].total_cmp(&entropy[a]).then(a.cmp(&b)));
        let max_entropy = order.first().map_or(0.0, |&j| entropy[j]);

        let mut top = TopK::new(keep);
        for (i, x) in xs.iter().enumerate() {
            let var_x = bx.variances()[i];
            let noise = self.gp.noise_variance(Channel::Constraint, x);
            let bound = ise_upper_bound(var_x, noise).min(max_entropy) * (1.0 + 1e-9);
            let floor = second[i];
            if bound.max(floor) < top.threshold() {
                continue;
            }
            let mut best_info: f64 = 0.0;
            let mut best_z: Option<usize> = None;
            if var_x > 0.0 {
                let sx = var_x.sqrt();
                for &j in &order {
                    if entropy[j] < best_info.max(floor).max(top.threshold()) {
                        break;
                    }
                    let vz = bz.variances()[j];
                    let cov = bx.cross_covariance(i, &bz, j);
                    let rho = (cov / (sx * vz.sqrt())).clamp(-1.0, 1.0);
                    let info = ise_mutual_info_raw(r2[j], var_x, rho, noise);
                    let wins = match best_z {
                        None => true,
                        Some(b) => {
                            info > best_info || (info == best_info && lex_cmp(&zs[j], &zs[b]) == Ordering::Less)
                        }
                    };
                    if wins {
                        best_info = info;
                        best_z = Some(j);
                    }
                }
            }
            let z_index = best_z.unwrap_or(0);
            top.offer(JointBest { x_index: i, z_index, value: best_info.max(floor) }, xs, zs);
        }
        top.into_vec()
    }
}

impl JointObjective for IseObjective<'_> {
    fn value(&self, x: &[f64], z: &[f64]) -> f64 {
        self.information(x, z).max(self.second_at(x))
    }

    fn scan(&self, xs: &[Vec<f64>], zs: &[Vec<f64>], keep: usize) -> Vec<JointBest> {
        self.scan_inner(xs, zs, keep, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{ExtendedKernel, ExtendedPoint, KernelSpec, NoiseModel};
    use crate::search::{maximize_joint, BoxDomain, SearchConfig, SearchContext, SearchMode};

    fn gp_with(points: &[(f64, f64)]) -> GaussianPosterior {
        let mut gp = GaussianPosterior::new(
            ExtendedKernel::shared(KernelSpec::isotropic(1, 0.5, 1.0)),
            NoiseModel::homoskedastic(0.05),
            NoiseModel::homoskedastic(0.05),
        )
        .unwrap();
        for &(x, y) in points {
            gp.observe(ExtendedPoint::constraint(vec![x]), y).unwrap();
            gp.observe(ExtendedPoint::objective(vec![x]), y).unwrap();
        }
        gp
    }

    /// Plain nested loop with the pointwise objective.
    fn brute(obj: &IseObjective, xs: &[Vec<f64>], zs: &[Vec<f64>]) -> f64 {
        xs.iter().flat_map(|x| zs.iter().map(move |z| obj.value(x, z))).fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn pruned_scan_matches_brute_force() {
        let gp = gp_with(&[(0.0, 0.8), (0.3, 1.1), (-0.4, 0.2)]);
        let pts: Vec<Vec<f64>> = (0..81).map(|i| vec![-2.0 + 0.05 * i as f64]).collect();
        let xs: Vec<Vec<f64>> = pts.iter().filter(|p| p[0].abs() < 0.5).cloned().collect();
        for second in [SecondTerm::None, SecondTerm::Mes { ystar: 1.5, weight: 1.0 }, SecondTerm::MesHat { phi: 3.0, weight: 0.1 }] {
            let obj = IseObjective::new(&gp, second);
            let best = obj.scan(&xs, &pts, 1)[0].clone();
            let expected = brute(&obj, &xs, &pts);
            assert!((best.value - expected).abs() <= 1e-12 * (1.0 + expected.abs()), "{second:?}: {} vs {expected}", best.value);
            assert!((obj.value(&xs[best.x_index], &pts[best.z_index]) - best.value).abs() < 1e-12);
        }
    }

    #[test]
    fn target_lies_outside_the_certified_region() {
        let gp = gp_with(&[(0.0, 1.0)]);
        let domain = BoxDomain::cube(1, -3.0, 3.0);
        let cfg = SearchConfig { mode: Some(SearchMode::Grid), grid_resolution: 121, ..Default::default() };
        let obj = IseObjective::new(&gp, SecondTerm::None);
        let r = maximize_joint(&obj, &|x| x[0].abs() <= 0.2, &domain, &cfg, &SearchContext::default()).unwrap();
        assert!(r.value > 0.0);
        assert!(r.z[0].abs() > 0.2, "{:?}", r.z);
    }

    #[test]
    fn collapsed_posterior_has_no_information() {
        let pts: Vec<(f64, f64)> = (0..41).flat_map(|i| std::iter::repeat((-1.0 + 0.05 * i as f64, 1.0)).take(30)).collect();
        let gp = GaussianPosterior::from_dataset(
            ExtendedKernel::shared(KernelSpec::isotropic(1, 0.5, 1.0)),
            NoiseModel::homoskedastic(1e-6),
            NoiseModel::homoskedastic(1e-6),
            pts.iter().map(|&(x, y)| crate::gp::Observation::new(ExtendedPoint::constraint(vec![x]), y, 1e-6)),
        )
        .unwrap();
        let obj = IseObjective::new(&gp, SecondTerm::None);
        let grid: Vec<Vec<f64>> = (0..41).map(|i| vec![-1.0 + 0.05 * i as f64]).collect();
        let best = obj.scan(&grid, &grid, 1)[0].value;
        assert!(best <= 1e-6, "{best}");
    }
}
