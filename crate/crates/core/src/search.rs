//! Derivative-free maximization of acquisition surfaces over a box, for single
//! points `x` and for the joint `(x, z)` problem.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::halton;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("no feasible probe among {probes} candidates")]
    NoFeasible { probes: usize },
    #[error("invalid search configuration: {0}")]
    Config(String),
}

/// Axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { lower, upper }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Maps a point of the unit cube into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(self.lower.iter().zip(&self.upper)).map(|(u, (lo, hi))| lo + u * (hi - lo)).collect()
    }

    /// Points of one axis of a uniform grid with `resolution` nodes, endpoints included.
    pub fn axis(&self, axis: usize, resolution: usize) -> Vec<f64> {
        let (lo, hi) = (self.lower[axis], self.upper[axis]);
        if resolution < 2 {
            return vec![0.5 * (lo + hi)];
        }
        (0..resolution).map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64).collect()
    }

    /// Full tensor grid, row-major with the last axis fastest.
    pub fn grid(&self, resolution: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|k| self.axis(k, resolution)).collect();
        tensor_grid(&axes)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err("box bounds must be non-empty and of equal length".into());
        }
        if self.lower.iter().zip(&self.upper).any(|(lo, hi)| !(lo < hi)) {
            return Err(format!("box lower bounds {:?} must be below upper bounds {:?}", self.lower, self.upper));
        }
        Ok(())
    }
}

/// Cartesian product of per-axis coordinates, last axis fastest.
pub fn tensor_grid(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Grid,
    Multistart,
    Line,
}

impl SearchMode {
    /// Grid up to two dimensions, multistart in three, random lines beyond.
    pub fn for_dim(dim: usize) -> Self {
        match dim {
            0..=2 => Self::Grid,
            3 => Self::Multistart,
            _ => Self::Line,
        }
    }
}

/// How the line is oriented in line mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineDirection {
    /// Uniform on the sphere.
    #[default]
    Random,
    /// A coordinate axis chosen uniformly.
    Coordinate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// `None` picks [`SearchMode::for_dim`].
    pub mode: Option<SearchMode>,
    pub grid_resolution: usize,
    /// Number of pattern-search refinements in multistart mode.
    pub multistart: usize,
    /// Quasi-random probes added to the coarse grid in multistart mode.
    pub random_probes: usize,
    /// Initial pattern step as a fraction of each box width.
    pub initial_step: f64,
    pub shrink: f64,
    /// Final pattern step as a fraction of each box width.
    pub tolerance: f64,
    pub max_evals: usize,
    /// Probes along the line in line mode.
    pub line_points: usize,
    pub line_direction: LineDirection,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            mode: None,
            grid_resolution: 40,
            multistart: 4,
            random_probes: 256,
            initial_step: 0.1,
            shrink: 0.5,
            tolerance: 1e-3,
            max_evals: 400,
            line_points: 200,
            line_direction: LineDirection::Random,
        }
    }
}

/// Nodes per axis of the coarse grid always included in multistart mode.
pub const COARSE_RESOLUTION: usize = 5;

impl SearchConfig {
    pub fn mode_for(&self, dim: usize) -> SearchMode {
        self.mode.unwrap_or_else(|| SearchMode::for_dim(dim))
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.grid_resolution < 2 || self.line_points < 2 {
            return Err(SearchError::Config("resolutions must be at least 2".into()));
        }
        if !(self.initial_step > 0.0 && self.tolerance > 0.0) {
            return Err(SearchError::Config("pattern steps must be positive".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(SearchError::Config(format!("shrink factor must lie in (0, 1), got {}", self.shrink)));
        }
        Ok(())
    }
}

/// Per-call inputs beyond the configuration.
#[derive(Clone, Debug, Default)]
pub struct SearchContext {
    /// Points always probed in grid and multistart mode (safe seed, certified points, ...).
    pub anchors: Vec<Vec<f64>>,
    /// Incumbent; the line in line mode passes through it.
    pub center: Vec<f64>,
    pub seed: u64,
}

/// Deterministic ordering used to break ties between equal values.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Builds the probe set for one call.
pub fn probes(domain: &BoxDomain, cfg: &SearchConfig, ctx: &SearchContext) -> Vec<Vec<f64>> {
    let d = domain.dim();
    let mut points = match cfg.mode_for(d) {
        SearchMode::Grid => domain.grid(cfg.grid_resolution),
        SearchMode::Multistart => {
            let mut pts = domain.grid(COARSE_RESOLUTION);
            let offset = 1 + (ctx.seed % 100_000) * cfg.random_probes as u64;
            pts.extend((0..cfg.random_probes as u64).map(|i| domain.from_unit(&halton(offset + i, d))));
            pts
        }
        SearchMode::Line => return line_probes(domain, cfg, ctx),
    };
    points.extend(ctx.anchors.iter().filter(|a| domain.contains(a)).cloned());
    points.sort_by(|a, b| lex_cmp(a, b));
    points.dedup();
    points
}

/// Random direction through the incumbent, clipped to the box.
fn line_probes(domain: &BoxDomain, cfg: &SearchConfig, ctx: &SearchContext) -> Vec<Vec<f64>> {
    let d = domain.dim();
    let center = if ctx.center.len() == d { ctx.center.clone() } else { domain.from_unit(&vec![0.5; d]) };
    let dir = match cfg.line_direction {
        LineDirection::Random => random_direction(d, ctx.seed),
        LineDirection::Coordinate => {
            let mut e = vec![0.0; d];
            e[(crate::math::uniform_from_seed(ctx.seed) * d as f64) as usize % d] = 1.0;
            e
        }
    };
    let (mut t_lo, mut t_hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..d {
        if dir[k].abs() < 1e-15 {
            continue;
        }
        let a = (domain.lower[k] - center[k]) / dir[k];
        let b = (domain.upper[k] - center[k]) / dir[k];
        t_lo = t_lo.max(a.min(b));
        t_hi = t_hi.min(a.max(b));
    }
    let mut points: Vec<Vec<f64>> = (0..cfg.line_points)
        .map(|i| {
            let t = t_lo + (t_hi - t_lo) * i as f64 / (cfg.line_points - 1) as f64;
            let mut p: Vec<f64> = center.iter().zip(&dir).map(|(c, u)| c + t * u).collect();
            domain.clamp(&mut p);
            p
        })
        .collect();
    points.push(center);
    points.sort_by(|a, b| lex_cmp(a, b));
    points.dedup();
    points
}

/// Unit vector drawn uniformly from the sphere.
pub fn random_direction(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingleResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Probe set used in the exhaustive stage.
    pub probes: Vec<Vec<f64>>,
}

fn better_single(value: f64, x: &[f64], best: Option<(&[f64], f64)>) -> bool {
    match best {
        None => true,
        Some((bx, bv)) => value > bv || (value == bv && lex_cmp(x, bx) == Ordering::Less),
    }
}

/// Maximizes `objective` over feasible points.
pub fn maximize_single(
    objective: &dyn Fn(&[f64]) -> f64,
    feasible: &dyn Fn(&[f64]) -> bool,
    domain: &BoxDomain,
    cfg: &SearchConfig,
    ctx: &SearchContext,
) -> Result<SingleResult, SearchError> {
    let probes = probes(domain, cfg, ctx);
    let mut scored: Vec<(usize, f64)> = Vec::new();
    for (i, p) in probes.iter().enumerate() {
        if feasible(p) {
            scored.push((i, objective(p)));
        }
    }
    if scored.is_empty() {
        return Err(SearchError::NoFeasible { probes: probes.len() });
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for &(i, v) in &scored {
        if better_single(v, &probes[i], best.as_ref().map(|(x, b)| (x.as_slice(), *b))) {
            best = Some((probes[i].clone(), v));
        }
    }
    if cfg.mode_for(domain.dim()) == SearchMode::Multistart {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| lex_cmp(&probes[a.0], &probes[b.0])));
        for &(i, v) in scored.iter().take(cfg.multistart) {
            let (x, val) = pattern_search(&probes[i], v, &|x: &[f64]| objective(x), feasible, domain, cfg);
            if better_single(val, &x, best.as_ref().map(|(x, b)| (x.as_slice(), *b))) {
                best = Some((x, val));
            }
        }
    }
    let (x, value) = best.expect("at least one feasible probe");
    Ok(SingleResult { x, value, probes })
}

/// Compass search from `start`, moving one coordinate at a time.
fn pattern_search(
    start: &[f64],
    start_value: f64,
    objective: &dyn Fn(&[f64]) -> f64,
    feasible: &dyn Fn(&[f64]) -> bool,
    domain: &BoxDomain,
    cfg: &SearchConfig,
) -> (Vec<f64>, f64) {
    let widths: Vec<f64> = (0..domain.dim()).map(|k| domain.width(k)).collect();
    pattern_search_scaled(start, start_value, objective, feasible, &widths, domain, cfg)
}

fn pattern_search_scaled(
    start: &[f64],
    start_value: f64,
    objective: &dyn Fn(&[f64]) -> f64,
    feasible: &dyn Fn(&[f64]) -> bool,
    widths: &[f64],
    bounds: &BoxDomain,
    cfg: &SearchConfig,
) -> (Vec<f64>, f64) {
    let mut x = start.to_vec();
    let mut value = start_value;
    let mut step = cfg.initial_step;
    let mut evals = 0;
    while step >= cfg.tolerance && evals < cfg.max_evals {
        let mut improved = false;
        for k in 0..x.len() {
            for sign in [1.0, -1.0] {
                let mut trial = x.clone();
                trial[k] += sign * step * widths[k];
                bounds.clamp(&mut trial);
                if trial[k] == x[k] || !feasible(&trial) {
                    continue;
                }
                evals += 1;
                let v = objective(&trial);
                if v > value {
                    x = trial;
                    value = v;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= cfg.shrink;
        }
    }
    (x, value)
}

/// Best pair found by a joint scan.
#[derive(Clone, Debug, PartialEq)]
pub struct JointBest {
    pub x_index: usize,
    pub z_index: usize,
    pub value: f64,
}

/// Objective over pairs `(x, z)`; `scan` may be overridden with an exact but
/// faster exhaustive search.
pub trait JointObjective {
    fn value(&self, x: &[f64], z: &[f64]) -> f64;

    /// The `keep` best distinct `x` with their best `z`, best first, ties broken
    /// towards lexicographically smaller `x` and then `z`.
    fn scan(&self, xs: &[Vec<f64>], zs: &[Vec<f64>], keep: usize) -> Vec<JointBest> {
        let mut top = TopK::new(keep);
        for (i, x) in xs.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for (j, z) in zs.iter().enumerate() {
                let v = self.value(x, z);
                if best.is_none_or(|(bj, bv)| v > bv || (v == bv && lex_cmp(z, &zs[bj]) == Ordering::Less)) {
                    best = Some((j, v));
                }
            }
            if let Some((j, v)) = best {
                top.offer(JointBest { x_index: i, z_index: j, value: v }, xs, zs);
            }
        }
        top.into_vec()
    }
}

/// Keeps the `k` best entries under the deterministic tie-break.
pub struct TopK {
    k: usize,
    items: Vec<JointBest>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        Self { k: k.max(1), items: Vec::new() }
    }

    /// Value an entry must reach to still be admitted.
    pub fn threshold(&self) -> f64 {
        if self.items.len() < self.k {
            f64::NEG_INFINITY
        } else {
            self.items.last().map_or(f64::NEG_INFINITY, |b| b.value)
        }
    }

    fn order(a: &JointBest, b: &JointBest, xs: &[Vec<f64>], zs: &[Vec<f64>]) -> Ordering {
        b.value
            .total_cmp(&a.value)
            .then_with(|| lex_cmp(&xs[a.x_index], &xs[b.x_index]))
            .then_with(|| lex_cmp(&zs[a.z_index], &zs[b.z_index]))
    }

    pub fn offer(&mut self, item: JointBest, xs: &[Vec<f64>], zs: &[Vec<f64>]) {
        if self.items.len() == self.k {
            let worst = self.items.last().unwrap();
            if Self::order(&item, worst, xs, zs) != Ordering::Less {
                return;
            }
            self.items.pop();
        }
        let pos = self.items.partition_point(|b| Self::order(b, &item, xs, zs) == Ordering::Less);
        self.items.insert(pos, item);
    }

    pub fn into_vec(self) -> Vec<JointBest> {
        self.items
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointResult {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub value: f64,
    /// Probe set used in the exhaustive stage, for both `x` and `z`.
    pub probes: Vec<Vec<f64>>,
}

/// Maximizes `objective(x, z)` over feasible `x` and any `z` in the box.
pub fn maximize_joint(
    objective: &dyn JointObjective,
    feasible: &dyn Fn(&[f64]) -> bool,
    domain: &BoxDomain,
    cfg: &SearchConfig,
    ctx: &SearchContext,
) -> Result<JointResult, SearchError> {
    let probes = probes(domain, cfg, ctx);
    let xs: Vec<Vec<f64>> = probes.iter().filter(|p| feasible(p)).cloned().collect();
    if xs.is_empty() {
        return Err(SearchError::NoFeasible { probes: probes.len() });
    }
    let multistart = cfg.mode_for(domain.dim()) == SearchMode::Multistart;
    let keep = if multistart { cfg.multistart.max(1) } else { 1 };
    let top = objective.scan(&xs, &probes, keep);
    let first = top.first().expect("scan over a non-empty set returns an entry");
    let mut best = (xs[first.x_index].clone(), probes[first.z_index].clone(), first.value);

    if multistart {
        let d = domain.dim();
        let mut widths: Vec<f64> = (0..d).map(|k| domain.width(k)).collect();
        widths.extend_from_within(..);
        let mut lower = domain.lower.clone();
        lower.extend_from_slice(&domain.lower);
        let mut upper = domain.upper.clone();
        upper.extend_from_slice(&domain.upper);
        let joint_box = BoxDomain::new(lower, upper);
        let value = |p: &[f64]| objective.value(&p[..d], &p[d..]);
        let feasible_joint = |p: &[f64]| feasible(&p[..d]);
        for start in &top {
            let mut p = xs[start.x_index].clone();
            p.extend_from_slice(&probes[start.z_index]);
            let (q, v) = pattern_search_scaled(&p, start.value, &value, &feasible_joint, &widths, &joint_box, cfg);
            let beats = v > best.2 || (v == best.2 && lex_cmp(&q[..d], &best.0) == Ordering::Less);
            if beats {
                best = (q[..d].to_vec(), q[d..].to_vec(), v);
            }
        }
    }
    Ok(JointResult { x: best.0, z: best.1, value: best.2, probes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Closure<F: Fn(&[f64], &[f64]) -> f64>(F);
    impl<F: Fn(&[f64], &[f64]) -> f64> JointObjective for Closure<F> {
        fn value(&self, x: &[f64], z: &[f64]) -> f64 {
            (self.0)(x, z)
        }
    }

    fn grid_cfg(res: usize) -> SearchConfig {
        SearchConfig { mode: Some(SearchMode::Grid), grid_resolution: res, ..Default::default() }
    }

    #[test]
    fn default_modes_by_dimension() {
        assert_eq!(SearchMode::for_dim(1), SearchMode::Grid);
        assert_eq!(SearchMode::for_dim(2), SearchMode::Grid);
        assert_eq!(SearchMode::for_dim(3), SearchMode::Multistart);
        assert_eq!(SearchMode::for_dim(6), SearchMode::Line);
    }

    #[test]
    fn constant_objective_returns_first_probe() {
        let domain = BoxDomain::cube(2, -1.0, 1.0);
        let r = maximize_single(&|_| 3.0, &|_| true, &domain, &grid_cfg(5), &SearchContext::default()).unwrap();
        assert_eq!(r.value, 3.0);
        assert_eq!(r.x, vec![-1.0, -1.0]);
        let j = maximize_joint(&Closure(|_, _| 3.0), &|_| true, &domain, &grid_cfg(5), &SearchContext::default()).unwrap();
        assert_eq!((j.x, j.z, j.value), (vec![-1.0, -1.0], vec![-1.0, -1.0], 3.0));
    }

    #[test]
    fn separable_joint_matches_axis_brute_force() {
        let g = |v: f64| -(v - 0.3).powi(2) + 0.1 * (5.0 * v).sin();
        let domain = BoxDomain::cube(1, -1.0, 1.0);
        let obj = Closure(|x: &[f64], z: &[f64]| g(x[0]) + g(z[0]));
        let r = maximize_joint(&obj, &|_| true, &domain, &grid_cfg(41), &SearchContext::default()).unwrap();
        let axis = domain.axis(0, 41);
        let best = axis.iter().copied().fold(f64::NEG_INFINITY, |m, v| m.max(g(v)));
        let arg = axis.iter().copied().find(|v| g(*v) == best).unwrap();
        assert_eq!(r.x, vec![arg]);
        assert_eq!(r.z, vec![arg]);
        assert_relative_eq!(r.value, 2.0 * best);
    }

    #[test]
    fn feasibility_is_respected() {
        let domain = BoxDomain::cube(1, -1.0, 1.0);
        let r = maximize_single(&|x| -x[0] * x[0], &|x| x[0] >= 0.5, &domain, &grid_cfg(21), &SearchContext::default())
            .unwrap();
        assert_relative_eq!(r.x[0], 0.5, epsilon = 1e-12);
        let err = maximize_single(&|x| x[0], &|_| false, &domain, &grid_cfg(3), &SearchContext::default());
        assert_eq!(err, Err(SearchError::NoFeasible { probes: 3 }));
    }

    #[test]
    fn multistart_finds_quadratic_peak() {
        let domain = BoxDomain::cube(3, -2.0, 2.0);
        let peak = [0.123, -0.77, 1.31];
        let f = |x: &[f64]| -x.iter().zip(&peak).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let cfg = SearchConfig { mode: Some(SearchMode::Multistart), tolerance: 1e-5, max_evals: 5000, ..Default::default() };
        let ctx = SearchContext { seed: 4, ..Default::default() };
        let r = maximize_single(&f, &|_| true, &domain, &cfg, &ctx).unwrap();
        for (a, b) in r.x.iter().zip(&peak) {
            assert!((a - b).abs() < 1e-3, "{:?}", r.x);
        }
        assert_eq!(r, maximize_single(&f, &|_| true, &domain, &cfg, &ctx).unwrap());
    }

    #[test]
    fn multistart_beats_coarse_grid() {
        let domain = BoxDomain::cube(3, -1.0, 1.0);
        let f = |x: &[f64], z: &[f64]| (3.0 * x[0]).sin() * (2.0 * z[1]).cos() - x[2] * x[2] + z[0];
        let cfg = SearchConfig { mode: Some(SearchMode::Multistart), ..Default::default() };
        let r = maximize_joint(&Closure(f), &|_| true, &domain, &cfg, &SearchContext::default()).unwrap();
        let coarse = domain.grid(COARSE_RESOLUTION);
        let floor = coarse.iter().flat_map(|x| coarse.iter().map(move |z| f(x, z))).fold(f64::NEG_INFINITY, f64::max);
        assert!(r.value >= floor);
    }

    #[test]
    fn line_mode_stays_on_line() {
        let domain = BoxDomain::cube(4, -1.0, 1.0);
        let center = vec![0.2, -0.1, 0.3, 0.0];
        let cfg = SearchConfig { mode: Some(SearchMode::Line), line_points: 50, ..Default::default() };
        let ctx = SearchContext { center: center.clone(), seed: 11, ..Default::default() };
        let dir = random_direction(4, 11);
        let r = maximize_single(&|x| x[0] + x[1], &|_| true, &domain, &cfg, &ctx).unwrap();
        let t = (r.x[0] - center[0]) / dir[0];
        for k in 0..4 {
            assert!((r.x[k] - (center[k] + t * dir[k])).abs() < 1e-9);
        }
    }

    #[test]
    fn topk_keeps_best_in_order() {
        let xs: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let zs = vec![vec![0.0]];
        let mut top = TopK::new(2);
        for (i, v) in [1.0, 5.0, 3.0, 5.0, 0.0].iter().enumerate() {
            top.offer(JointBest { x_index: i, z_index: 0, value: *v }, &xs, &zs);
        }
        let got: Vec<usize> = top.into_vec().iter().map(|b| b.x_index).collect();
        assert_eq!(got, vec![1, 3]);
    }
}
