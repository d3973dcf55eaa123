use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gp::{Channel, GaussianPosterior};
use crate::math::halton;
use crate::safe_set::SafeRegion;
use crate::search::{maximize_joint, maximize_single, BoxDomain, SearchConfig, SearchContext};

use super::ise::{IseObjective, SecondTerm};
use super::mes::{alpha_mes_noisy, gumbel_max_sample};
use super::AcquisitionError;

/// Safe acquisition modes built on the information-gain criteria.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectMode {
    IseBo,
    IseOnly,
    MesSafe,
    TheoryCombined { phi: f64 },
}

/// Which term decided the selected point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Ise,
    Mes,
    MesHat,
    Uncertainty,
    Expander,
    Maximizer,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ise => "ise",
            Self::Mes => "mes",
            Self::MesHat => "mes_hat",
            Self::Uncertainty => "uncertainty",
            Self::Expander => "expander",
            Self::Maximizer => "maximizer",
        })
    }
}

/// Everything an acquisition step reads.
pub struct SelectionContext<'a> {
    pub gp: &'a GaussianPosterior,
    pub region: &'a SafeRegion,
    pub domain: &'a BoxDomain,
    pub search: &'a SearchConfig,
    /// Iteration index used for `beta_n`.
    pub n: usize,
    /// Best certified point so far; the line in line mode passes through it.
    pub incumbent: Vec<f64>,
    pub seed: u64,
    /// Weight on the max-value term in the combined criterion.
    pub mes_weight: f64,
    /// Quasi-random points used to fit the distribution of `y*`.
    pub ystar_candidates: usize,
}

impl SelectionContext<'_> {
    pub fn is_safe(&self, x: &[f64]) -> bool {
        self.region.is_safe(self.gp, x, self.n)
    }

    pub fn search_context(&self) -> SearchContext {
        SearchContext { anchors: self.region.archive().to_vec(), center: self.incumbent.clone(), seed: self.seed }
    }

    /// Samples `y*` over quasi-random points plus `extra`, keeping only safe
    /// points unless `unconstrained`.
    pub fn sample_ystar(&self, extra: &[Vec<f64>], unconstrained: bool) -> Result<f64, AcquisitionError> {
        let d = self.domain.dim();
        let mut candidates: Vec<Vec<f64>> = (1..=self.ystar_candidates as u64)
            .map(|i| self.domain.from_unit(&halton(i, d)))
            .filter(|x| unconstrained || self.is_safe(x))
            .collect();
        candidates.extend(extra.iter().filter(|x| unconstrained || self.is_safe(x)).cloned());
        candidates.extend(self.region.archive().iter().cloned());
        if candidates.is_empty() {
            return Err(AcquisitionError::EmptyCandidates);
        }
        let batch = self.gp.batch(Channel::Objective, &candidates);
        let sigmas: Vec<f64> = batch.variances().iter().map(|v| v.sqrt()).collect();
        let u = crate::math::uniform_from_seed(self.seed);
        Ok(gumbel_max_sample(batch.means(), &sigmas, u))
    }

    pub fn mes_at(&self, x: &[f64], ystar: f64) -> f64 {
        let (m, v) = self.gp.mean_var_at(Channel::Objective, x);
        alpha_mes_noisy(m, v.sqrt(), self.gp.noise_variance(Channel::Objective, x), ystar)
    }
}

/// Outcome of one acquisition step.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub x: Vec<f64>,
    /// Target of the safe-exploration term, when it was evaluated.
    pub z: Option<Vec<f64>>,
    pub component: Component,
    pub alpha_ise: f64,
    pub alpha_mes: f64,
    pub ystar: Option<f64>,
    /// Probe set scanned during this step.
    pub probes: Vec<Vec<f64>>,
}

/// Picks the next safe evaluation point.
pub fn select_next(ctx: &SelectionContext, mode: SelectMode) -> Result<Selection, AcquisitionError> {
    let search_ctx = ctx.search_context();
    let feasible = |x: &[f64]| ctx.is_safe(x);
    match mode {
        SelectMode::MesSafe => {
            let probes = crate::search::probes(ctx.domain, ctx.search, &search_ctx);
            let ystar = ctx.sample_ystar(&probes, false)?;
            let r = maximize_single(&|x| ctx.mes_at(x, ystar), &feasible, ctx.domain, ctx.search, &search_ctx)?;
            let (alpha_ise, z) = IseObjective::new(ctx.gp, SecondTerm::None).alpha_ise(&r.x, &r.probes);
            Ok(Selection {
                z: Some(r.probes[z].clone()),
                x: r.x,
                component: Component::Mes,
                alpha_ise,
                alpha_mes: r.value,
                ystar: Some(ystar),
                probes: r.probes,
            })
        }
        SelectMode::IseBo | SelectMode::IseOnly | SelectMode::TheoryCombined { .. } => {
            let probes = crate::search::probes(ctx.domain, ctx.search, &search_ctx);
            let (second, ystar) = match mode {
                SelectMode::IseBo => {
                    let ystar = ctx.sample_ystar(&probes, false)?;
                    (SecondTerm::Mes { ystar, weight: ctx.mes_weight }, Some(ystar))
                }
                SelectMode::TheoryCombined { phi } => {
                    let safe: Vec<Vec<f64>> = probes.iter().filter(|x| feasible(x)).cloned().collect();
                    let max_mu = ctx.gp.batch(Channel::Objective, &safe).means().iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if !(phi > max_mu) {
                        return Err(AcquisitionError::Precondition(format!(
                            "phi = {phi} must exceed the largest safe posterior mean {max_mu}"
                        )));
                    }
                    (SecondTerm::MesHat { phi, weight: ctx.mes_weight }, None)
                }
                _ => (SecondTerm::None, None),
            };
            let objective = IseObjective::new(ctx.gp, second);
            let r = maximize_joint(&objective, &feasible, ctx.domain, ctx.search, &search_ctx)?;
            let alpha_ise = objective.information(&r.x, &r.z);
            let (alpha_mes, component) = match second {
                SecondTerm::None => (ystar.map_or(0.0, |y| ctx.mes_at(&r.x, y)), Component::Ise),
                SecondTerm::Mes { ystar, weight } => {
                    let v = ctx.mes_at(&r.x, ystar);
                    (v, if weight * v > alpha_ise { Component::Mes } else { Component::Ise })
                }
                SecondTerm::MesHat { weight, .. } => {
                    let (m, v) = ctx.gp.mean_var_at(Channel::Objective, &r.x);
                    let raw = second.raw(m, v, 0.0);
                    (raw, if weight * raw > alpha_ise { Component::MesHat } else { Component::Ise })
                }
            };
            Ok(Selection { x: r.x, z: Some(r.z), component, alpha_ise, alpha_mes, ystar, probes: r.probes })
        }
    }
}
