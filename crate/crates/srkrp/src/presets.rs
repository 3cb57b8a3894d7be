//! Expansion of an experiment and its overrides into campaign points.
//!
//! Every figure preset assumes `S = 8` stragglers unless overridden, so
//! `N = survivors + S`. Each point gets its own seed derived from the run
//! seed and the point's position.

use srkrp_core::analysis::{theta_weights, ExperimentConfig, LogBase};
use srkrp_core::codec::SystemConfig;
use srkrp_core::linalg::RankTolerance;
use srkrp_core::weights::{CoefficientDistribution, WeightDistribution, WeightSpec};

use crate::config::{Experiment, Overrides, RunSpec};
use crate::{Error, Result};

pub const DEFAULT_STRAGGLERS: usize = 8;
pub const DEFAULT_TARGET_FAILURES: u64 = 50;
pub const DEFAULT_TRIALS_MAX: u64 = 100_000;
/// Stability points run a fixed number of end-to-end trials.
pub const DEFAULT_STABILITY_TRIALS: u64 = 1_000;

const THETA_FINE: [f64; 7] = [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];
const THETA_COARSE: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
const THETA_STABILITY: [f64; 5] = [1.0, 1.25, 1.5, 1.75, 2.0];
const FIG1_W_AVG_TWENTIETHS_SQ: u32 = 3600; // (20·u_avg)(20·v_avg) for w_avg = 9
const FIG6_W_STAR: [f64; 7] = [16.0, 24.0, 32.0, 40.0, 48.0, 56.0, 64.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointKind {
    /// Rank campaign.
    Failure,
    /// End-to-end decoding with inputs drawn from the given distribution.
    Stability(CoefficientDistribution),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub config: ExperimentConfig,
    pub kind: PointKind,
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn point_seed(run_seed: u64, index: usize) -> u64 {
    splitmix64(run_seed ^ splitmix64(index as u64))
}

/// Keys that make no sense for an experiment.
fn inapplicable(exp: Experiment) -> &'static [&'static str] {
    match exp {
        Experiment::Fig1 => &["theta", "udist", "vdist", "w_star_avg", "a", "b"],
        Experiment::Fig2_3 | Experiment::Fig5 => &["udist", "vdist", "w_star_avg", "a", "b"],
        Experiment::Fig4 => &["workers", "udist", "vdist", "w_star_avg", "a", "b"],
        Experiment::Fig6 => &["theta", "master_udist", "master_vdist", "a", "b"],
        Experiment::Fig7 => &["udist", "vdist", "w_star_avg", "target_failures", "a", "b"],
        Experiment::Custom => &["w_star_avg", "a", "b"],
        Experiment::Matmul => &["theta", "w_star_avg", "trials_max", "target_failures", "norm", "log_base"],
    }
}

pub fn check_applicable(exp: Experiment, o: &Overrides) -> Result<()> {
    let set = o.set_keys();
    for key in inapplicable(exp) {
        if set.iter().any(|(k, _)| k == key) {
            return Err(Error::config(*key, format!("does not apply to experiment {exp}")));
        }
    }
    if let Some(thetas) = &o.theta {
        if let Some(t) = thetas.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::config("theta", format!("{t} is not a positive number")));
        }
    }
    if matches!(o.trials_max, Some(0)) {
        return Err(Error::config("trials_max", "must be at least 1"));
    }
    if matches!(o.target_failures, Some(0)) {
        return Err(Error::config("target_failures", "must be at least 1"));
    }
    Ok(())
}

struct Builder<'a> {
    o: &'a Overrides,
    seed: u64,
    points: Vec<Point>,
    stability: bool,
}

/// Worker and master distributions of one point.
struct Dists {
    u: WeightDistribution,
    v: WeightDistribution,
    extra: usize,
    mu: WeightDistribution,
    mv: WeightDistribution,
    theta: Option<f64>,
}

impl Builder<'_> {
    fn log_base(&self) -> LogBase {
        self.o.log_base.unwrap_or_default()
    }

    fn stragglers(&self) -> usize {
        self.o.stragglers.unwrap_or(DEFAULT_STRAGGLERS)
    }

    fn masters(&self, m: usize, n: usize) -> Result<(WeightDistribution, WeightDistribution)> {
        let resolve = |spec: &Option<WeightSpec>, max| match spec {
            Some(s) => s.resolve(max),
            None => WeightDistribution::dense(max),
        };
        Ok((resolve(&self.o.master_udist, m)?, resolve(&self.o.master_vdist, n)?))
    }

    fn theta_dists(&self, theta: f64, m: usize, n: usize, extra: usize) -> Result<Dists> {
        let (u, v) = theta_weights(theta, m, n, self.log_base())?;
        let (mu, mv) = self.masters(m, n)?;
        Ok(Dists { u, v, extra, mu, mv, theta: Some(theta) })
    }

    fn push(&mut self, m: usize, n: usize, survivors: usize, d: Dists, shape: Option<(usize, usize, usize)>) -> Result<()> {
        let s = self.stragglers();
        let workers = self.o.workers.unwrap_or(survivors + s);
        let mut sys = SystemConfig::new(m, n, workers, s)?
            .with_worker_dists(d.u, d.v)
            .with_extra(d.extra, d.mu, d.mv)
            .with_coeff(self.o.coeff_dist.unwrap_or_default());
        if let Some((r, s, t)) = shape {
            sys = sys.with_shape(r, s, t);
        }
        let (trials_max, target) = if self.stability {
            (self.o.trials_max.unwrap_or(DEFAULT_STABILITY_TRIALS), 1)
        } else {
            (
                self.o.trials_max.unwrap_or(DEFAULT_TRIALS_MAX),
                self.o.target_failures.unwrap_or(DEFAULT_TARGET_FAILURES),
            )
        };
        let mut cfg = ExperimentConfig::new(sys, point_seed(self.seed, self.points.len()))
            .with_budget(trials_max, target);
        cfg.theta = d.theta;
        cfg.log_base = self.log_base();
        cfg.norm = self.o.norm.unwrap_or_default();
        cfg.rank_tolerance = match self.o.rank_tol {
            Some(t) => RankTolerance::Absolute(t),
            None => RankTolerance::Default,
        };
        cfg.validate()?;
        let kind = if self.stability {
            PointKind::Stability(CoefficientDistribution::StandardNormal)
        } else {
            PointKind::Failure
        };
        self.points.push(Point { config: cfg, kind });
        Ok(())
    }

    fn thetas(&self, default: &[f64]) -> Vec<f64> {
        self.o.theta.clone().unwrap_or_else(|| default.to_vec())
    }

    fn extras(&self, default: &[usize]) -> Vec<usize> {
        self.o.extra_computations.clone().unwrap_or_else(|| default.to_vec())
    }
}

/// Ternary distributions over weights 2, 3, 4 with probabilities on a 0.05
/// grid, as `(α₂, α₃, α₄)` in twentieths.
fn ternary_grid() -> Vec<[u32; 3]> {
    (0..=20)
        .flat_map(|a2| (0..=20 - a2).map(move |a3| [a2, a3, 20 - a2 - a3]))
        .collect()
}

fn ternary(t: [u32; 3], max: usize) -> Result<WeightDistribution> {
    let pairs: Vec<(usize, f64)> = t
        .iter()
        .zip([2usize, 3, 4])
        .filter(|(a, _)| **a > 0)
        .map(|(a, w)| (w, *a as f64 / 20.0))
        .collect();
    Ok(WeightDistribution::new(&pairs, max)?)
}

/// The `(U, V)` pairs of the ternary grid whose mean weights multiply to 9.
pub fn fig1_pairs(m: usize, n: usize) -> Result<Vec<(WeightDistribution, WeightDistribution)>> {
    let grid = ternary_grid();
    let mean20 = |t: &[u32; 3]| 40 + t[1] + 2 * t[2];
    let mut out = Vec::new();
    for a in &grid {
        for b in &grid {
            if mean20(a) * mean20(b) == FIG1_W_AVG_TWENTIETHS_SQ {
                out.push((ternary(*a, m)?, ternary(*b, n)?));
            }
        }
    }
    Ok(out)
}

/// All campaign points of a run, in CSV order.
pub fn expand(spec: &RunSpec) -> Result<Vec<Point>> {
    let o = &spec.overrides;
    check_applicable(spec.experiment, o)?;
    let mut b = Builder {
        o,
        seed: spec.seed,
        points: Vec::new(),
        stability: spec.experiment == Experiment::Fig7,
    };
    match spec.experiment {
        Experiment::Fig1 => {
            let (m, n) = (o.m.unwrap_or(8), o.n.unwrap_or(8));
            let extra = b.extras(&[0]);
            for r in extra {
                for (u, v) in fig1_pairs(m, n)? {
                    let (mu, mv) = b.masters(m, n)?;
                    b.push(m, n, m * n, Dists { u, v, extra: r, mu, mv, theta: None }, None)?;
                }
            }
        }
        Experiment::Fig2_3 => {
            let sides: Vec<(usize, usize)> = match (o.m, o.n) {
                (None, None) => vec![(8, 8), (16, 16), (32, 32)],
                (m, n) => vec![(m.or(n).unwrap_or(8), n.or(m).unwrap_or(8))],
            };
            let extra = b.extras(&[0]);
            for (m, n) in sides {
                for &r in &extra {
                    for theta in b.thetas(&THETA_FINE) {
                        let d = b.theta_dists(theta, m, n, r)?;
                        b.push(m, n, m * n, d, None)?;
                    }
                }
            }
        }
        Experiment::Fig4 => {
            let (m, n) = (o.m.unwrap_or(8), o.n.unwrap_or(8));
            let k = m * n;
            let extra = b.extras(&[0]);
            for &r in &extra {
                for theta in b.thetas(&THETA_COARSE) {
                    for survivors in (k..=k + 16).step_by(2) {
                        let d = b.theta_dists(theta, m, n, r)?;
                        b.push(m, n, survivors, d, None)?;
                    }
                }
            }
        }
        Experiment::Fig5 => {
            let (m, n) = (o.m.unwrap_or(8), o.n.unwrap_or(8));
            for r in b.extras(&[0, 1, 2]) {
                for theta in b.thetas(&THETA_FINE) {
                    let d = b.theta_dists(theta, m, n, r)?;
                    b.push(m, n, m * n, d, None)?;
                }
            }
        }
        Experiment::Fig6 => {
            let (m, n) = (o.m.unwrap_or(8), o.n.unwrap_or(8));
            let u = o.udist.clone().unwrap_or(WeightSpec::Point(3)).resolve(m)?;
            let v = o.vdist.clone().unwrap_or(WeightSpec::Point(3)).resolve(n)?;
            let w_stars = o.w_star_avg.clone().unwrap_or_else(|| FIG6_W_STAR.to_vec());
            for r in b.extras(&[0, 1, 2]) {
                if r == 0 {
                    let (mu, mv) = b.masters(m, n)?;
                    b.push(m, n, m * n, Dists { u: u.clone(), v: v.clone(), extra: 0, mu, mv, theta: None }, None)?;
                    continue;
                }
                for &w in &w_stars {
                    if !(w >= 1.0 && w <= (m * n) as f64) {
                        return Err(Error::config("w_star_avg", format!("{w} outside [1, K]")));
                    }
                    let side = w.sqrt();
                    let mu = WeightDistribution::simplest(side, m)?;
                    let mv = WeightDistribution::simplest(side, n)?;
                    b.push(m, n, m * n, Dists { u: u.clone(), v: v.clone(), extra: r, mu, mv, theta: None }, None)?;
                }
            }
        }
        Experiment::Fig7 => {
            let (m, n) = (o.m.unwrap_or(8), o.n.unwrap_or(8));
            for r in b.extras(&[0, 1, 2]) {
                for theta in b.thetas(&THETA_STABILITY) {
                    let d = b.theta_dists(theta, m, n, r)?;
                    b.push(m, n, m * n, d, Some((64, 64, 64)))?;
                }
            }
        }
        Experiment::Custom => {
            let (m, n) = (o.m.unwrap_or(8), o.n.unwrap_or(8));
            if o.theta.is_some() && (o.udist.is_some() || o.vdist.is_some()) {
                return Err(Error::config("theta", "give either theta or udist/vdist, not both"));
            }
            for r in b.extras(&[0]) {
                match &o.theta {
                    Some(thetas) => {
                        for &theta in thetas {
                            let d = b.theta_dists(theta, m, n, r)?;
                            b.push(m, n, m * n, d, None)?;
                        }
                    }
                    None => {
                        let u = o.udist.clone().unwrap_or(WeightSpec::Dense).resolve(m)?;
                        let v = o.vdist.clone().unwrap_or(WeightSpec::Dense).resolve(n)?;
                        let (mu, mv) = b.masters(m, n)?;
                        b.push(m, n, m * n, Dists { u, v, extra: r, mu, mv, theta: None }, None)?;
                    }
                }
            }
        }
        Experiment::Matmul => {
            return Err(Error::config("experiment", "matmul has no campaign points"));
        }
    }
    Ok(b.points)
}
