//! Closed-form approximations, the cost model and Monte-Carlo campaigns.

mod approx;
pub mod campaign;
mod cost;
pub mod report;

pub use approx::{
    failure_prob_approx, single_weight_full_rank_prob, zero_column_prob_approx,
    zero_failure_upper_bound,
};
pub use campaign::{
    failure_trial, run_failure_campaign, run_sequential, run_stability_campaign, stability_trial,
    theta_weights, trial_rng, CampaignResult, CampaignTally, ErrorNorm, ExperimentConfig, LogBase,
    StopRule, StragglerMode, TrialOutcome,
};
pub use cost::{cost_model, CostReport};
pub use report::{csv_row, empirical_vs_approx_report, ComparisonRow, CSV_HEADER};
