//! CSV rows and text tables for campaign results.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::campaign::{CampaignResult, ExperimentConfig, StragglerMode};
use crate::linalg::RankTolerance;
use crate::{Error, Result};

/// The fixed leading columns, then the parameters needed to re-run a row.
pub const CSV_HEADER: &str = "K,N,S,R,theta,w_avg,w_star_avg,trials,failures,p_f,stderr,p_zc,approx_p_zc,mean_rel_error,seed,\
p_f_upper95,svd_failures,m,n,udist,vdist,master_udist,master_vdist,coeff_dist,straggler_mode,norm,rank_tol,log_base";

/// Deterministic float text: shortest round-trip decimal for ordinary
/// magnitudes, scientific notation for the rest.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let a = x.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt_float(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub fn straggler_mode_label(mode: &StragglerMode) -> String {
    match mode {
        StragglerMode::UniformRandom => "uniform".to_string(),
        StragglerMode::Fixed(set) => {
            let ids: Vec<String> = set.iter().map(|l| l.to_string()).collect();
            format!("fixed:{}", ids.join(";"))
        }
    }
}

pub fn rank_tol_label(tol: RankTolerance) -> String {
    match tol {
        RankTolerance::Default => "default".to_string(),
        RankTolerance::Absolute(t) => format_float(t),
    }
}

/// One CSV line (no trailing newline) in [`CSV_HEADER`] order.
pub fn csv_row(cfg: &ExperimentConfig, res: &CampaignResult) -> String {
    let sys = &cfg.system;
    let fields = [
        res.k.to_string(),
        res.workers.to_string(),
        res.stragglers.to_string(),
        res.extra.to_string(),
        opt_float(res.theta),
        format_float(res.w_avg),
        format_float(res.w_star_avg),
        res.trials_run.to_string(),
        res.failures.to_string(),
        format_float(res.p_f),
        format_float(res.stderr),
        format_float(res.p_zc),
        format_float(res.approx_p_zc),
        opt_float(res.mean_rel_error),
        res.seed.to_string(),
        opt_float(res.p_f_upper),
        res.svd_failures.to_string(),
        sys.m.to_string(),
        sys.n.to_string(),
        sys.worker_u.to_string(),
        sys.worker_v.to_string(),
        if sys.extra > 0 { sys.master_u.to_string() } else { String::new() },
        if sys.extra > 0 { sys.master_v.to_string() } else { String::new() },
        sys.coeff.to_string(),
        straggler_mode_label(&cfg.straggler_mode),
        cfg.norm.name().to_string(),
        rank_tol_label(cfg.rank_tolerance),
        cfg.log_base.name().to_string(),
    ];
    fields.join(",")
}

/// Empirical failure and zero-column rates next to the Bernoulli
/// approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub k: usize,
    pub survivors: usize,
    pub extra: usize,
    pub theta: Option<f64>,
    pub trials: u64,
    pub p_f: f64,
    pub p_zc: f64,
    pub approx_p_zc: f64,
    /// `p_f / approx_p_zc`, absent when the approximation is zero.
    pub ratio: Option<f64>,
}

pub fn empirical_vs_approx_report(results: &[CampaignResult]) -> Result<Vec<ComparisonRow>> {
    if results.is_empty() {
        return Err(Error::param("results", "need at least one campaign result"));
    }
    Ok(results
        .iter()
        .map(|r| ComparisonRow {
            k: r.k,
            survivors: r.workers - r.stragglers,
            extra: r.extra,
            theta: r.theta,
            trials: r.trials_run,
            p_f: r.p_f,
            p_zc: r.p_zc,
            approx_p_zc: r.approx_p_zc,
            ratio: (r.approx_p_zc > 0.0).then(|| r.p_f / r.approx_p_zc),
        })
        .collect())
}

/// Fixed-width text rendering of a comparison report.
pub fn render_comparison(rows: &[ComparisonRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>5} {:>5} {:>3} {:>7} {:>9} {:>11} {:>11} {:>11} {:>8}",
        "K", "N-S", "R", "theta", "trials", "P_f", "P_zc", "P_zc~", "ratio"
    );
    for r in rows {
        let theta = r.theta.map(|t| format!("{t:.3}")).unwrap_or_else(|| "-".into());
        let ratio = r.ratio.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:>5} {:>5} {:>3} {:>7} {:>9} {:>11.4e} {:>11.4e} {:>11.4e} {:>8}",
            r.k, r.survivors, r.extra, theta, r.trials, r.p_f, r.p_zc, r.approx_p_zc, ratio
        );
    }
    out
}
