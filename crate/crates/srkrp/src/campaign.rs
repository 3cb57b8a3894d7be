//! Parallel campaign driver.
//!
//! Trials are evaluated in batches on a rayon pool and folded into the tally
//! strictly in index order, so the result is the same as the sequential
//! runner for any thread count. Outcomes past the stopping point are
//! computed and discarded.

use rayon::prelude::*;
use srkrp_core::analysis::{
    failure_trial, stability_trial, CampaignResult, CampaignTally, ExperimentConfig, StopRule,
    TrialOutcome,
};
use srkrp_core::weights::CoefficientDistribution;

use crate::Result;

const FIRST_BATCH: u64 = 64;
const MAX_BATCH: u64 = 8192;

pub fn run_parallel<F>(cfg: &ExperimentConfig, rule: StopRule, trial: F) -> CampaignResult
where
    F: Fn(u64) -> TrialOutcome + Sync,
{
    let limit = match rule {
        StopRule::Failures { max, .. } | StopRule::Trials { max } => max,
    };
    let mut tally = CampaignTally::new(rule);
    let mut next = 0u64;
    let mut batch = FIRST_BATCH;
    while !tally.is_done() {
        let end = (next + batch).min(limit);
        let outcomes: Vec<TrialOutcome> = (next..end).into_par_iter().map(&trial).collect();
        for outcome in &outcomes {
            if tally.push(outcome) {
                break;
            }
        }
        next = end;
        batch = (batch * 2).min(MAX_BATCH);
    }
    tally.finish(cfg)
}

pub fn failure_campaign(cfg: &ExperimentConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    let rule = StopRule::Failures {
        target: cfg.target_failures,
        max: cfg.trials_max,
    };
    Ok(run_parallel(cfg, rule, |i| failure_trial(cfg, i)))
}

pub fn stability_campaign(
    cfg: &ExperimentConfig,
    input_dist: CoefficientDistribution,
) -> Result<CampaignResult> {
    cfg.validate()?;
    let rule = StopRule::Trials {
        max: cfg.trials_max,
    };
    Ok(run_parallel(cfg, rule, |i| stability_trial(cfg, input_dist, i)))
}
