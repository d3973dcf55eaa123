//! Comparison strategies: safe uncertainty sampling, MES with and without the
//! safety restriction, and a SafeOpt variant with a GP lower-bound safe set.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::acquisition::{select_next, AcquisitionError, Component, IseObjective, SecondTerm, SelectMode, Selection, SelectionContext};
use crate::gp::Channel;
use crate::search::{lex_cmp, maximize_single, probes, SearchError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineSpec {
    Uncertainty,
    MesSafe,
    MesUnconstrained,
    SafeOpt { lipschitz: f64 },
}

impl BaselineSpec {
    pub fn validate(&self) -> Result<(), AcquisitionError> {
        match self {
            Self::SafeOpt { lipschitz } if !(*lipschitz > 0.0 && lipschitz.is_finite()) => {
                Err(AcquisitionError::Precondition(format!("Lipschitz constant must be positive, got {lipschitz}")))
            }
            _ => Ok(()),
        }
    }
}

/// Index of the largest value; ties go to the lexicographically smallest point.
fn argmax(points: &[Vec<f64>], values: &[f64], allowed: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in (0..points.len()).filter(|&i| allowed(i)) {
        best = match best {
            None => Some(i),
            Some(b) => match values[i].total_cmp(&values[b]) {
                Ordering::Greater => Some(i),
                Ordering::Equal if lex_cmp(&points[i], &points[b]) == Ordering::Less => Some(i),
                _ => Some(b),
            },
        };
    }
    best
}

fn info_gain(ctx: &SelectionContext, x: &[f64], candidates: &[Vec<f64>]) -> (f64, Option<Vec<f64>>) {
    let (value, z) = IseObjective::new(ctx.gp, SecondTerm::None).alpha_ise(x, candidates);
    (value, candidates.get(z).cloned())
}

pub fn select_baseline(ctx: &SelectionContext, spec: BaselineSpec) -> Result<Selection, AcquisitionError> {
    spec.validate()?;
    match spec {
        BaselineSpec::MesSafe => select_next(ctx, SelectMode::MesSafe),
        BaselineSpec::MesUnconstrained => {
            let search_ctx = ctx.search_context();
            let candidates = probes(ctx.domain, ctx.search, &search_ctx);
            let ystar = ctx.sample_ystar(&candidates, true)?;
            let r = maximize_single(&|x| ctx.mes_at(x, ystar), &|_| true, ctx.domain, ctx.search, &search_ctx)?;
            let (alpha_ise, z) = info_gain(ctx, &r.x, &r.probes);
            Ok(Selection { x: r.x, z, component: Component::Mes, alpha_ise, alpha_mes: r.value, ystar: Some(ystar), probes: r.probes })
        }
        BaselineSpec::Uncertainty => {
            let candidates = probes(ctx.domain, ctx.search, &ctx.search_context());
            let safe: Vec<bool> = candidates.iter().map(|x| ctx.is_safe(x)).collect();
            let batch = ctx.gp.batch(Channel::Constraint, &candidates);
            let i = argmax(&candidates, batch.variances(), |i| safe[i])
                .ok_or(SearchError::NoFeasible { probes: candidates.len() })?;
            let x = candidates[i].clone();
            let (alpha_ise, z) = info_gain(ctx, &x, &candidates);
            Ok(Selection { x, z, component: Component::Uncertainty, alpha_ise, alpha_mes: f64::NAN, ystar: None, probes: candidates })
        }
        BaselineSpec::SafeOpt { lipschitz } => safeopt(ctx, lipschitz),
    }
}

struct SafeOptSets {
    candidates: Vec<Vec<f64>>,
    expander: Vec<bool>,
    maximizer: Vec<bool>,
    width: Vec<f64>,
}

/// Expanders: safe points whose constraint upper bound, decreased by `L` times
/// the distance, still reaches a candidate outside the safe set. Maximizers:
/// safe points whose objective upper bound beats the best safe objective lower bound.
fn classify(ctx: &SelectionContext, lipschitz: f64) -> Result<SafeOptSets, AcquisitionError> {
    let candidates = probes(ctx.domain, ctx.search, &ctx.search_context());
    let safe: Vec<bool> = candidates.iter().map(|x| ctx.is_safe(x)).collect();
    if !safe.iter().any(|s| *s) {
        return Err(SearchError::NoFeasible { probes: candidates.len() }.into());
    }
    let beta = ctx.region.beta(ctx.n);
    let bs = ctx.gp.batch(Channel::Constraint, &candidates);
    let bf = ctx.gp.batch(Channel::Objective, &candidates);
    let sd_s: Vec<f64> = bs.variances().iter().map(|v| v.max(0.0).sqrt()).collect();
    let sd_f: Vec<f64> = bf.variances().iter().map(|v| v.max(0.0).sqrt()).collect();

    let best_lower = (0..candidates.len())
        .filter(|&i| safe[i])
        .map(|i| bf.means()[i] - beta * sd_f[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let outside: Vec<&Vec<f64>> = candidates.iter().zip(&safe).filter(|(_, s)| !**s).map(|(x, _)| x).collect();

    let n = candidates.len();
    let (mut expander, mut maximizer) = (vec![false; n], vec![false; n]);
    for i in (0..n).filter(|&i| safe[i]) {
        maximizer[i] = bf.means()[i] + beta * sd_f[i] >= best_lower;
        let nearest = outside
            .iter()
            .map(|z| z.iter().zip(&candidates[i]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
            .sqrt();
        expander[i] = nearest.is_finite() && bs.means()[i] + beta * sd_s[i] - lipschitz * nearest >= 0.0;
    }
    let width = sd_s.iter().zip(&sd_f).map(|(a, b)| a.max(*b)).collect();
    Ok(SafeOptSets { candidates, expander, maximizer, width })
}

fn safeopt(ctx: &SelectionContext, lipschitz: f64) -> Result<Selection, AcquisitionError> {
    let sets = classify(ctx, lipschitz)?;
    let i = argmax(&sets.candidates, &sets.width, |i| sets.expander[i] || sets.maximizer[i])
        .expect("the best safe lower bound belongs to a maximizer");
    let component = if sets.maximizer[i] { Component::Maximizer } else { Component::Expander };
    let x = sets.candidates[i].clone();
    let (alpha_ise, z) = info_gain(ctx, &x, &sets.candidates);
    Ok(Selection { x, z, component, alpha_ise, alpha_mes: f64::NAN, ystar: None, probes: sets.candidates })
}

/// Expander and maximizer candidates of the SafeOpt rule.
pub fn safeopt_sets(ctx: &SelectionContext, lipschitz: f64) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), AcquisitionError> {
    let sets = classify(ctx, lipschitz)?;
    let pick = |mask: &[bool]| sets.candidates.iter().zip(mask).filter(|(_, m)| **m).map(|(x, _)| x.clone()).collect();
    Ok((pick(&sets.expander), pick(&sets.maximizer)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{ExtendedKernel, ExtendedPoint, GaussianPosterior, KernelSpec, NoiseModel};
    use crate::safe_set::{BetaSchedule, SafeRegion};
    use crate::search::{BoxDomain, SearchConfig, SearchMode};

    fn gp() -> GaussianPosterior {
        GaussianPosterior::new(
            ExtendedKernel::shared(KernelSpec::isotropic(1, 0.5, 1.0)),
            NoiseModel::homoskedastic(0.01),
            NoiseModel::homoskedastic(0.01),
        )
        .unwrap()
    }

    fn with_ctx<R>(gp: &GaussianPosterior, f: impl FnOnce(&SelectionContext) -> R) -> R {
        let mut region = SafeRegion::new(BetaSchedule::constant(2.0), vec![0.0]).unwrap();
        let domain = BoxDomain::cube(1, -2.0, 2.0);
        let search = SearchConfig { mode: Some(SearchMode::Grid), grid_resolution: 81, ..Default::default() };
        let probes = domain.grid(81);
        region.certify_passing(gp, &probes, 1);
        let ctx = SelectionContext {
            gp,
            region: &region,
            domain: &domain,
            search: &search,
            n: 1,
            incumbent: vec![0.0],
            seed: 5,
            mes_weight: 1.0,
            ystar_candidates: 64,
        };
        f(&ctx)
    }

    #[test]
    fn uncertainty_with_prior_only_returns_seed() {
        let gp = gp();
        let sel = with_ctx(&gp, |ctx| select_baseline(ctx, BaselineSpec::Uncertainty).unwrap());
        assert_eq!(sel.x, vec![0.0]);
    }

    #[test]
    fn unconstrained_mes_ignores_safety() {
        let mut gp = gp();
        // Small peak at the seed, large peak far outside the certified region.
        for (x, y) in [(0.0, 1.0), (1.8, 3.0), (1.9, 3.0), (1.7, 2.8)] {
            gp.observe(ExtendedPoint::objective(vec![x]), y).unwrap();
        }
        gp.observe(ExtendedPoint::constraint(vec![0.0]), 1.0).unwrap();
        let sel = with_ctx(&gp, |ctx| {
            assert!(!ctx.is_safe(&[1.8]));
            select_baseline(ctx, BaselineSpec::MesUnconstrained).unwrap()
        });
        assert!(sel.x[0] > 1.0, "{:?}", sel.x);
        let safe_sel = with_ctx(&gp, |ctx| {
            let s = select_baseline(ctx, BaselineSpec::MesSafe).unwrap();
            assert!(ctx.is_safe(&s.x));
            s
        });
        assert!(safe_sel.x[0] < 1.0);
    }

    #[test]
    fn safeopt_small_lipschitz_makes_every_safe_point_an_expander() {
        let mut gp = gp();
        for x in [-0.2, 0.0, 0.2] {
            gp.observe(ExtendedPoint::constraint(vec![x]), 2.0).unwrap();
            gp.observe(ExtendedPoint::objective(vec![x]), 0.0).unwrap();
        }
        let (expanders, _) = with_ctx(&gp, |ctx| safeopt_sets(ctx, 1e-9).unwrap());
        let safe = with_ctx(&gp, |ctx| ctx.domain.grid(81).into_iter().filter(|x| ctx.is_safe(x)).count());
        assert!(safe > 1);
        assert_eq!(expanders.len(), safe);
        let (expanders, _) = with_ctx(&gp, |ctx| safeopt_sets(ctx, 1e9).unwrap());
        assert!(expanders.is_empty());
        let sel = with_ctx(&gp, |ctx| select_baseline(ctx, BaselineSpec::SafeOpt { lipschitz: 1.0 }).unwrap());
        with_ctx(&gp, |ctx| assert!(ctx.is_safe(&sel.x)));
    }

    #[test]
    fn rejects_non_positive_lipschitz() {
        assert!(BaselineSpec::SafeOpt { lipschitz: 0.0 }.validate().is_err());
    }
}
