//! Seeded experiment campaigns with per-iteration traces and aggregate statistics.

mod output;

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{select_next, Component, SelectMode, SelectionContext};
use crate::baselines::{select_baseline, BaselineSpec};
use crate::benchmarks::{self, BenchmarkError, BenchmarkProblem, PendulumConfig};
use crate::gp::{Channel, ExtendedKernel, ExtendedPoint, GaussianPosterior, KernelSpec, NoiseModel};
use crate::math::mix_seed;
use crate::safe_set::{BetaSchedule, SafeRegion};
use crate::search::SearchConfig;

pub use output::{aggregate, csv_header, output_dir, write_csv, write_outputs, Aggregate, CampaignSummary, RegretPoint, SeedSummary, OUTPUT_DIR_ENV};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error("records disagree on the number of iterations ({0} vs {1})")]
    Mismatch(usize, usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Acquisition strategy of a campaign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    IseBo,
    IseOnly,
    MesSafe,
    MesUnconstrained,
    Uncertainty,
    #[serde(rename = "safeopt")]
    SafeOpt { lipschitz: f64 },
    TheoryCombined { phi: f64 },
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::IseBo => f.write_str("ise_bo"),
            Self::IseOnly => f.write_str("ise_only"),
            Self::MesSafe => f.write_str("mes_safe"),
            Self::MesUnconstrained => f.write_str("mes_unconstrained"),
            Self::Uncertainty => f.write_str("uncertainty"),
            Self::SafeOpt { lipschitz } => write!(f, "safeopt_L{lipschitz}"),
            Self::TheoryCombined { phi } => write!(f, "theory_combined_phi{phi}"),
        }
    }
}

/// Prior and noise replacements applied to both channels.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Overrides {
    pub lengthscale: Option<f64>,
    pub outputscale: Option<f64>,
    /// Homoskedastic noise variance used by both the model and the simulated observations.
    pub noise_var: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub benchmark: String,
    pub strategy: Strategy,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_beta")]
    pub beta: BetaSchedule,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub search: SearchConfig,
    /// Weight of the max-value term in `ise_bo` and `theory_combined`.
    #[serde(default = "default_mes_weight")]
    pub mes_weight: f64,
    #[serde(default = "default_ystar_candidates")]
    pub ystar_candidates: usize,
    /// Observe the objective channel as well as the constraint.
    #[serde(default = "default_true")]
    pub observe_objective: bool,
    /// Pendulum settings; defaults when absent.
    #[serde(default)]
    pub pendulum: Option<PendulumConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_beta() -> BetaSchedule {
    BetaSchedule::constant(2.0)
}

fn default_mes_weight() -> f64 {
    1.0
}

fn default_ystar_candidates() -> usize {
    256
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    pub fn new(benchmark: impl Into<String>, strategy: Strategy, iterations: usize, seeds: Vec<u64>) -> Self {
        Self {
            benchmark: benchmark.into(),
            strategy,
            iterations,
            seeds,
            beta: default_beta(),
            overrides: Overrides::default(),
            search: SearchConfig::default(),
            mes_weight: default_mes_weight(),
            ystar_candidates: default_ystar_candidates(),
            observe_objective: true,
            pendulum: None,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let config: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if !benchmarks::NAMES.contains(&self.benchmark.as_str()) {
            return bad(format!("unknown benchmark '{}' (known: {})", self.benchmark, benchmarks::NAMES.join(", ")));
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if !(self.mes_weight > 0.0) {
            return bad(format!("mes_weight must be positive, got {}", self.mes_weight));
        }
        if self.ystar_candidates == 0 {
            return bad("ystar_candidates must be positive".into());
        }
        for v in [self.overrides.lengthscale, self.overrides.outputscale, self.overrides.noise_var].into_iter().flatten() {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("overrides must be positive, got {v}"));
            }
        }
        if let Strategy::SafeOpt { lipschitz } = self.strategy {
            if !(lipschitz > 0.0) {
                return bad(format!("Lipschitz constant must be positive, got {lipschitz}"));
            }
        }
        self.beta.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.search.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    /// Problem instance for `seed` with overrides applied.
    pub fn problem(&self, seed: u64) -> Result<BenchmarkProblem, HarnessError> {
        let mut problem = match (&self.pendulum, self.benchmark.as_str()) {
            (Some(cfg), "pendulum") => benchmarks::pendulum_problem(cfg)?,
            _ => benchmarks::by_name(&self.benchmark, seed)?,
        };
        let o = &self.overrides;
        if o.lengthscale.is_some() || o.outputscale.is_some() {
            let rebuild = |k: KernelSpec| {
                let ls = o.lengthscale.map_or(k.lengthscales.clone(), |l| vec![l; k.dim()]);
                KernelSpec { lengthscales: ls, outputscale: o.outputscale.unwrap_or(k.outputscale), ..k }
            };
            problem.kernel = match &problem.kernel {
                ExtendedKernel::BlockDiagonal { objective, constraint } => {
                    ExtendedKernel::independent(rebuild(objective.clone()), rebuild(constraint.clone()))
                }
                ExtendedKernel::Coregionalized { base, coregion } => {
                    ExtendedKernel::Coregionalized { base: rebuild(base.clone()), coregion: *coregion }
                }
            };
        }
        if let Some(v) = o.noise_var {
            problem.noise = [NoiseModel::homoskedastic(v), NoiseModel::homoskedastic(v)];
        }
        Ok(problem)
    }
}

/// One iteration of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub n: usize,
    pub x: Vec<f64>,
    pub component: Component,
    pub alpha_ise: f64,
    pub alpha_mes: f64,
    pub yf: f64,
    pub ys: f64,
    pub f_true: f64,
    pub s_true: f64,
    pub violation: bool,
    pub regret: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub rows: Vec<RunRow>,
    /// Archive size after each iteration.
    pub safe_set_sizes: Vec<usize>,
    pub wall_time_s: f64,
    /// Set when the run stopped early.
    pub error: Option<String>,
}

impl RunRecord {
    pub fn final_regret(&self) -> Option<f64> {
        self.rows.last().map(|r| r.regret)
    }

    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.violation).count()
    }

    pub fn violation_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.violations() as f64 / self.rows.len() as f64
        }
    }
}

/// Model and safe set at the end of a run.
pub struct FinalState {
    pub problem: BenchmarkProblem,
    pub gp: GaussianPosterior,
    pub region: SafeRegion,
    /// Iteration index at which the final safe set is evaluated.
    pub n: usize,
}

/// Outcome of all seeds of a campaign.
#[derive(Clone, Debug)]
pub struct Campaign {
    pub config: RunConfig,
    pub records: Vec<RunRecord>,
}

impl Campaign {
    pub fn failed_seeds(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Runs one seed; errors inside the loop end the run and are kept in the record.
pub fn run_seed(config: &RunConfig, seed: u64) -> Result<(RunRecord, FinalState), HarnessError> {
    let start = Instant::now();
    let problem = config.problem(seed)?;
    let [obj_noise, con_noise] = problem.noise.clone();
    let mut gp = GaussianPosterior::new(problem.kernel.clone(), obj_noise, con_noise)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut region = SafeRegion::new(config.beta.clone(), problem.x0.clone()).map_err(|e| HarnessError::Config(e.to_string()))?;
    let fallback = problem.objective(&problem.x0)?;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x0b5e));
    let mut best_safe = f64::NEG_INFINITY;
    let mut incumbent = problem.x0.clone();
    let mut rows = Vec::with_capacity(config.iterations);
    let mut sizes = Vec::with_capacity(config.iterations);
    let mut error = None;

    for n in 1..=config.iterations {
        let index = gp.channel_len(Channel::Constraint);
        let step = (|| -> Result<RunRow, String> {
            let ctx = SelectionContext {
                gp: &gp,
                region: &region,
                domain: &problem.domain,
                search: &config.search,
                n: index,
                incumbent: incumbent.clone(),
                seed: mix_seed(seed, n as u64),
                mes_weight: config.mes_weight,
                ystar_candidates: config.ystar_candidates,
            };
            let selection = match config.strategy {
                Strategy::IseBo => select_next(&ctx, SelectMode::IseBo),
                Strategy::IseOnly => select_next(&ctx, SelectMode::IseOnly),
                Strategy::MesSafe => select_next(&ctx, SelectMode::MesSafe),
                Strategy::TheoryCombined { phi } => select_next(&ctx, SelectMode::TheoryCombined { phi }),
                Strategy::MesUnconstrained => select_baseline(&ctx, BaselineSpec::MesUnconstrained),
                Strategy::Uncertainty => select_baseline(&ctx, BaselineSpec::Uncertainty),
                Strategy::SafeOpt { lipschitz } => select_baseline(&ctx, BaselineSpec::SafeOpt { lipschitz }),
            }
            .map_err(|e| format!("iteration {n}: {e}"))?;
            let x = selection.x;
            let f_true = problem.objective(&x).map_err(|e| e.to_string())?;
            let s_true = problem.constraint(&x).map_err(|e| e.to_string())?;
            let mut noisy = |channel: Channel| {
                let sd = problem.noise_variance(channel, &x).sqrt();
                Normal::new(0.0, sd).expect("finite noise").sample(&mut noise_rng)
            };
            let yf = f_true + noisy(Channel::Objective);
            let ys = s_true + noisy(Channel::Constraint);

            // The selected point and every probe that passed the bound join the archive
            // under the posterior used for the selection.
            if ctx.is_safe(&x) {
                region.certify(&gp, &x, index).map_err(|e| e.to_string())?;
            }
            region.certify_passing(&gp, &selection.probes, index);

            gp.observe(ExtendedPoint::constraint(x.clone()), ys).map_err(|e| e.to_string())?;
            if config.observe_objective {
                gp.observe(ExtendedPoint::objective(x.clone()), yf).map_err(|e| e.to_string())?;
            }

            let violation = crate::safe_set::is_violation(s_true);
            if !violation && f_true > best_safe {
                best_safe = f_true;
            }
            let best = if best_safe.is_finite() { best_safe } else { fallback };
            Ok(RunRow {
                n,
                x,
                component: selection.component,
                alpha_ise: selection.alpha_ise,
                alpha_mes: selection.alpha_mes,
                yf,
                ys,
                f_true,
                s_true,
                violation,
                regret: problem.fstar - best,
            })
        })();
        match step {
            Ok(row) => rows.push(row),
            Err(e) => {
                log::warn!("seed {seed}: {e}");
                error = Some(e);
                break;
            }
        }
        sizes.push(region.archive_len());
        incumbent = best_archived(&gp, &region);
    }

    let n = gp.channel_len(Channel::Constraint);
    let record = RunRecord { seed, rows, safe_set_sizes: sizes, wall_time_s: start.elapsed().as_secs_f64(), error };
    Ok((record, FinalState { problem, gp, region, n }))
}

/// Archived point with the largest objective posterior mean.
fn best_archived(gp: &GaussianPosterior, region: &SafeRegion) -> Vec<f64> {
    let archive = region.archive();
    let batch = gp.batch(Channel::Objective, archive);
    let mut best = 0;
    for (i, m) in batch.means().iter().enumerate() {
        if *m > batch.means()[best] {
            best = i;
        }
    }
    archive[best].clone()
}

/// Runs every seed in parallel. Set-up failures of a seed end up in its record.
pub fn run_campaign(config: &RunConfig) -> Result<Campaign, HarnessError> {
    config.validate()?;
    let records = config
        .seeds
        .par_iter()
        .map(|&seed| match run_seed(config, seed) {
            Ok((record, _)) => record,
            Err(e) => RunRecord { seed, rows: Vec::new(), safe_set_sizes: Vec::new(), wall_time_s: 0.0, error: Some(e.to_string()) },
        })
        .collect();
    Ok(Campaign { config: config.clone(), records })
}
