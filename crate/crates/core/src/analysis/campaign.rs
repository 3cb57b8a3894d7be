//! Monte-Carlo campaigns over random code realizations and straggler sets.
//!
//! Trial `i` of a campaign draws everything from its own ChaCha8 stream
//! (stream `i` of the master seed), so trials can run in any order or in
//! parallel and the tally, fed in trial order, is always the same.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::approx::{zero_column_prob_approx, zero_failure_upper_bound};
use crate::codec::{self, CodeRealization, Decoder, SystemConfig};
use crate::linalg::{self, DenseMatrix, Matrix, RankTolerance};
use crate::weights::{CoefficientDistribution, WeightDistribution};
use crate::{Error, Result};

pub const DEFAULT_TRIALS_MAX: u64 = 1_000_000;
pub const DEFAULT_TARGET_FAILURES: u64 = 100;

/// Base of the logarithm in `w_avg = θ·log K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Natural,
    Two,
    Ten,
}

impl LogBase {
    pub fn log(&self, x: f64) -> f64 {
        match self {
            LogBase::Natural => libm::log(x),
            LogBase::Two => libm::log2(x),
            LogBase::Ten => libm::log10(x),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LogBase::Natural => "e",
            LogBase::Two => "2",
            LogBase::Ten => "10",
        }
    }
}

impl core::str::FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "e" | "ln" | "natural" => Ok(LogBase::Natural),
            "2" | "log2" => Ok(LogBase::Two),
            "10" | "log10" => Ok(LogBase::Ten),
            other => Err(Error::Parse(format!(
                "unknown log base `{other}` (expected e, 2 or 10)"
            ))),
        }
    }
}

/// How the straggling workers are chosen in each trial.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum StragglerMode {
    /// Uniform over all size-`S` subsets of the workers.
    #[default]
    UniformRandom,
    /// The same stragglers in every trial.
    Fixed(Vec<usize>),
}

/// Matrix norm used for the relative decoding error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorNorm {
    #[default]
    Spectral,
    Frobenius,
}

impl ErrorNorm {
    pub fn norm(&self, m: &DenseMatrix) -> Result<f64> {
        match self {
            ErrorNorm::Spectral => linalg::spectral_norm(m),
            ErrorNorm::Frobenius => Ok(m.frobenius_norm()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ErrorNorm::Spectral => "spectral",
            ErrorNorm::Frobenius => "frobenius",
        }
    }
}

impl core::str::FromStr for ErrorNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spectral" | "2" => Ok(ErrorNorm::Spectral),
            "frobenius" | "fro" => Ok(ErrorNorm::Frobenius),
            other => Err(Error::Parse(format!(
                "unknown norm `{other}` (expected spectral or frobenius)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    /// Weight multiplier when the worker distributions were derived from
    /// `w_avg = θ·ln K`.
    pub theta: Option<f64>,
    pub trials_max: u64,
    pub target_failures: u64,
    pub master_seed: u64,
    pub straggler_mode: StragglerMode,
    pub rank_tolerance: RankTolerance,
    pub norm: ErrorNorm,
    pub log_base: LogBase,
}

impl ExperimentConfig {
    pub fn new(system: SystemConfig, master_seed: u64) -> Self {
        Self {
            system,
            theta: None,
            trials_max: DEFAULT_TRIALS_MAX,
            target_failures: DEFAULT_TARGET_FAILURES,
            master_seed,
            straggler_mode: StragglerMode::UniformRandom,
            rank_tolerance: RankTolerance::Default,
            norm: ErrorNorm::Spectral,
            log_base: LogBase::Natural,
        }
    }

    pub fn with_budget(mut self, trials_max: u64, target_failures: u64) -> Self {
        self.trials_max = trials_max;
        self.target_failures = target_failures;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.trials_max == 0 {
            return Err(Error::param("trials_max", "must be at least 1"));
        }
        if self.target_failures == 0 {
            return Err(Error::param("target_failures", "must be at least 1"));
        }
        if let StragglerMode::Fixed(set) = &self.straggler_mode {
            let mut sorted = set.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != set.len() || set.len() != self.system.stragglers {
                return Err(Error::param(
                    "straggler_mode",
                    format!(
                        "fixed set must hold S = {} distinct workers",
                        self.system.stragglers
                    ),
                ));
            }
            if sorted.iter().any(|&l| l >= self.system.workers) {
                return Err(Error::param("straggler_mode", "straggler index out of range"));
            }
        }
        Ok(())
    }

    /// `θ` as reported: the configured value, or `w_avg / log K`.
    pub fn effective_theta(&self) -> Option<f64> {
        self.theta.or_else(|| {
            let k = self.system.k();
            (k > 1).then(|| self.system.w_avg() / self.log_base.log(k as f64))
        })
    }
}

/// The simplest per-side distributions for `w_avg = θ·log K`: both sides
/// get mean `√w_avg`.
pub fn theta_weights(
    theta: f64,
    m: usize,
    n: usize,
    base: LogBase,
) -> Result<(WeightDistribution, WeightDistribution)> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::param("theta", format!("{theta} is not a positive number")));
    }
    let w_avg = theta * base.log((m * n) as f64);
    let side = libm::sqrt(w_avg);
    Ok((
        WeightDistribution::simplest(side, m)?,
        WeightDistribution::simplest(side, n)?,
    ))
}

/// The independent stream for trial `index`.
pub fn trial_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Survivor set (ascending) for one trial.
pub fn sample_survivors<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    mode: &StragglerMode,
    rng: &mut R,
) -> Vec<usize> {
    let mut straggling = alloc::vec![false; cfg.workers];
    match mode {
        StragglerMode::UniformRandom => {
            for l in rand::seq::index::sample(rng, cfg.workers, cfg.stragglers) {
                straggling[l] = true;
            }
        }
        StragglerMode::Fixed(set) => {
            for &l in set {
                straggling[l] = true;
            }
        }
    }
    (0..cfg.workers).filter(|&l| !straggling[l]).collect()
}

/// What one trial observed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrialOutcome {
    /// Numerical rank of `G`, absent when the SVD did not converge.
    pub rank: Option<usize>,
    /// `G` is rank deficient (or its rank could not be determined).
    pub failed: bool,
    pub zero_column: bool,
    pub svd_failed: bool,
    /// Relative error of a successful decode (stability trials only).
    pub rel_error: Option<f64>,
}

fn rank_outcome(g: &DenseMatrix, k: usize, tol: RankTolerance) -> TrialOutcome {
    let zero_column = linalg::dense_has_zero_column(g);
    match linalg::numerical_rank(g, tol) {
        Ok(rank) => TrialOutcome {
            rank: Some(rank),
            failed: rank < k,
            zero_column,
            ..TrialOutcome::default()
        },
        Err(_) => TrialOutcome {
            failed: true,
            zero_column,
            svd_failed: true,
            ..TrialOutcome::default()
        },
    }
}

/// One rank trial: random stragglers, fresh code, rank and zero-column test.
pub fn failure_trial(cfg: &ExperimentConfig, index: u64) -> TrialOutcome {
    let mut rng = trial_rng(cfg.master_seed, index);
    let survivors = sample_survivors(&cfg.system, &cfg.straggler_mode, &mut rng);
    let gen = CodeRealization::draw(&cfg.system, &mut rng).and_then(|c| c.assemble(&survivors));
    match gen {
        Ok(gen) => rank_outcome(&gen.g, cfg.system.k(), cfg.rank_tolerance),
        Err(_) => TrialOutcome {
            failed: true,
            ..TrialOutcome::default()
        },
    }
}

/// One end-to-end trial: random inputs, stragglers and code; encode the
/// surviving and master tasks, multiply, decode and compare against the
/// direct product.
pub fn stability_trial(
    cfg: &ExperimentConfig,
    input_dist: CoefficientDistribution,
    index: u64,
) -> TrialOutcome {
    let sys = &cfg.system;
    let mut rng = trial_rng(cfg.master_seed, index);
    let a = DenseMatrix::from_fn(sys.r, sys.s, |_, _| input_dist.sample(&mut rng));
    let b = DenseMatrix::from_fn(sys.r, sys.t, |_, _| input_dist.sample(&mut rng));
    let survivors = sample_survivors(sys, &cfg.straggler_mode, &mut rng);
    let gen = match CodeRealization::draw(sys, &mut rng).and_then(|c| c.assemble(&survivors)) {
        Ok(gen) => gen,
        Err(_) => {
            return TrialOutcome {
                failed: true,
                ..TrialOutcome::default()
            }
        }
    };
    let mut outcome = rank_outcome(&gen.g, sys.k(), cfg.rank_tolerance);
    if outcome.failed {
        return outcome;
    }
    match decode_relative_error(cfg, &gen, &a, &b) {
        Ok(err) => outcome.rel_error = Some(err),
        Err(_) => outcome.failed = true,
    }
    outcome
}

fn decode_relative_error(
    cfg: &ExperimentConfig,
    gen: &codec::GeneratorMatrix,
    a: &DenseMatrix,
    b: &DenseMatrix,
) -> Result<f64> {
    let sys = &cfg.system;
    let a_blocks: Vec<Matrix> = codec::partition_columns(a, sys.m)?
        .into_iter()
        .map(Matrix::from)
        .collect();
    let b_blocks: Vec<Matrix> = codec::partition_columns(b, sys.n)?
        .into_iter()
        .map(Matrix::from)
        .collect();
    let results = gen
        .p_rows
        .iter()
        .zip(&gen.q_rows)
        .map(|(p, q)| {
            let ea = codec::encode_block(&a_blocks, p)?;
            let eb = codec::encode_block(&b_blocks, q)?;
            linalg::matmul_transpose_left(&ea, &eb)
        })
        .collect::<Result<Vec<_>>>()?;
    let c_hat = Decoder::new(gen, sys.m, sys.n, cfg.rank_tolerance)?.decode(&results)?;
    let c = linalg::matmul_transpose_left(&a.clone().into(), &b.clone().into())?;
    let denom = cfg.norm.norm(&c)?;
    Ok(cfg.norm.norm(&c.sub(&c_hat)?)? / denom)
}

/// When a campaign stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// After `target` failures or `max` trials, whichever comes first.
    Failures { target: u64, max: u64 },
    /// After exactly `max` trials.
    Trials { max: u64 },
}

/// In-order accumulator of trial outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignTally {
    rule: StopRule,
    trials: u64,
    failures: u64,
    zero_columns: u64,
    svd_failures: u64,
    error_sum: f64,
    successes: u64,
}

impl CampaignTally {
    pub fn new(rule: StopRule) -> Self {
        Self {
            rule,
            trials: 0,
            failures: 0,
            zero_columns: 0,
            svd_failures: 0,
            error_sum: 0.0,
            successes: 0,
        }
    }

    pub fn is_done(&self) -> bool {
        match self.rule {
            StopRule::Failures { target, max } => self.failures >= target || self.trials >= max,
            StopRule::Trials { max } => self.trials >= max,
        }
    }

    /// Records the next trial in index order. Returns `true` once the stop
    /// rule is met; later outcomes are ignored.
    pub fn push(&mut self, outcome: &TrialOutcome) -> bool {
        if self.is_done() {
            return true;
        }
        self.trials += 1;
        self.failures += outcome.failed as u64;
        self.zero_columns += outcome.zero_column as u64;
        self.svd_failures += outcome.svd_failed as u64;
        if let Some(e) = outcome.rel_error {
            self.error_sum += e;
            self.successes += 1;
        }
        self.is_done()
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn finish(&self, cfg: &ExperimentConfig) -> CampaignResult {
        let sys = &cfg.system;
        let n = self.trials.max(1) as f64;
        let p_f = self.failures as f64 / n;
        let approx = zero_column_prob_approx(sys.k(), sys.survivors(), sys.w_avg(), sys.extra, sys.w_star_avg())
            .unwrap_or(f64::NAN);
        CampaignResult {
            k: sys.k(),
            workers: sys.workers,
            stragglers: sys.stragglers,
            extra: sys.extra,
            theta: cfg.effective_theta(),
            w_avg: sys.w_avg(),
            w_star_avg: if sys.extra > 0 { sys.w_star_avg() } else { 0.0 },
            trials_run: self.trials,
            failures: self.failures,
            p_f,
            stderr: libm::sqrt(p_f * (1.0 - p_f) / n),
            p_f_upper: (self.failures == 0).then(|| zero_failure_upper_bound(self.trials, 0.95)),
            zero_col_count: self.zero_columns,
            p_zc: self.zero_columns as f64 / n,
            approx_p_zc: approx,
            svd_failures: self.svd_failures,
            successes: self.successes,
            mean_rel_error: (self.successes > 0).then(|| self.error_sum / self.successes as f64),
            seed: cfg.master_seed,
        }
    }
}

/// Aggregated statistics of one campaign point.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub k: usize,
    pub workers: usize,
    pub stragglers: usize,
    pub extra: usize,
    pub theta: Option<f64>,
    pub w_avg: f64,
    pub w_star_avg: f64,
    pub trials_run: u64,
    pub failures: u64,
    /// `failures / trials_run`
    pub p_f: f64,
    /// `√(p_f(1 − p_f)/trials_run)`
    pub stderr: f64,
    /// One-sided 95% upper bound on `p_f`, reported when no failure was seen.
    pub p_f_upper: Option<f64>,
    pub zero_col_count: u64,
    pub p_zc: f64,
    /// Bernoulli-matrix approximation of the zero-column probability.
    pub approx_p_zc: f64,
    pub svd_failures: u64,
    /// Trials that decoded successfully (stability campaigns).
    pub successes: u64,
    pub mean_rel_error: Option<f64>,
    pub seed: u64,
}

impl CampaignResult {
    /// `√(stderr_a² + stderr_b²)`
    pub fn combined_stderr(&self, other: &CampaignResult) -> f64 {
        libm::sqrt(self.stderr * self.stderr + other.stderr * other.stderr)
    }
}

/// Runs trials `0, 1, 2, …` through `trial` until `rule` is met.
pub fn run_sequential(
    cfg: &ExperimentConfig,
    rule: StopRule,
    mut trial: impl FnMut(u64) -> TrialOutcome,
) -> CampaignResult {
    let mut tally = CampaignTally::new(rule);
    let mut index = 0;
    while !tally.is_done() {
        tally.push(&trial(index));
        index += 1;
    }
    tally.finish(cfg)
}

/// Rank campaign: stops after `target_failures` rank-deficient generators
/// or `trials_max` trials.
pub fn run_failure_campaign(cfg: &ExperimentConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    let rule = StopRule::Failures {
        target: cfg.target_failures,
        max: cfg.trials_max,
    };
    Ok(run_sequential(cfg, rule, |i| failure_trial(cfg, i)))
}

/// Stability campaign: exactly `trials_max` end-to-end trials; the mean
/// relative error is taken over the trials that decoded.
pub fn run_stability_campaign(
    cfg: &ExperimentConfig,
    input_dist: CoefficientDistribution,
) -> Result<CampaignResult> {
    cfg.validate()?;
    let rule = StopRule::Trials {
        max: cfg.trials_max,
    };
    Ok(run_sequential(cfg, rule, |i| stability_trial(cfg, input_dist, i)))
}
