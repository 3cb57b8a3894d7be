//! Executes a [`RunSpec`]: campaigns write CSV, `matmul` writes a matrix.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use srkrp_core::analysis::{csv_row, CampaignResult, CSV_HEADER};
use srkrp_core::codec::SystemConfig;
use srkrp_core::linalg::{Matrix, RankTolerance};
use srkrp_core::weights::WeightSpec;

use crate::campaign::{failure_campaign, stability_campaign};
use crate::config::{Experiment, RunSpec};
use crate::io::{read_matrix, write_matrix, write_text};
use crate::presets::{self, expand, Point, PointKind};
use crate::runtime::{random_stragglers, Runtime};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub output: PathBuf,
    /// CSV text written to `output` (campaign experiments only).
    pub csv: Option<String>,
    /// Human-readable summary.
    pub table: String,
}

fn jobs(spec: &RunSpec) -> usize {
    spec.jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

/// Echoes the resolved run parameters, one `# key = value` line each.
fn echo_spec(spec: &RunSpec, log: &mut dyn Write) {
    let _ = writeln!(log, "# experiment = {}", spec.experiment);
    let _ = writeln!(log, "# seed = {}", spec.seed);
    let _ = writeln!(log, "# jobs = {}", jobs(spec));
    let _ = writeln!(log, "# output = {}", spec.output().display());
    let o = &spec.overrides;
    let stability = spec.experiment == Experiment::Fig7;
    let defaults = [
        ("stragglers", o.stragglers.unwrap_or(presets::DEFAULT_STRAGGLERS).to_string()),
        (
            "trials_max",
            o.trials_max
                .unwrap_or(if stability { presets::DEFAULT_STABILITY_TRIALS } else { presets::DEFAULT_TRIALS_MAX })
                .to_string(),
        ),
        ("target_failures", o.target_failures.unwrap_or(presets::DEFAULT_TARGET_FAILURES).to_string()),
        ("coeff_dist", o.coeff_dist.unwrap_or_default().to_string()),
        ("norm", o.norm.unwrap_or_default().name().to_string()),
        ("log_base", o.log_base.unwrap_or_default().name().to_string()),
        ("rank_tol", o.rank_tol.map_or("default".to_string(), |t| t.to_string())),
    ];
    for (k, v) in defaults {
        let _ = writeln!(log, "# {k} = {v}");
    }
    for (k, v) in o.set_keys() {
        if !matches!(k, "stragglers" | "trials_max" | "target_failures" | "coeff_dist" | "norm" | "log_base" | "rank_tol") {
            let _ = writeln!(log, "# {k} = {v}");
        }
    }
}

fn run_point(p: &Point) -> Result<CampaignResult> {
    match p.kind {
        PointKind::Failure => failure_campaign(&p.config),
        PointKind::Stability(input) => stability_campaign(&p.config, input),
    }
}

/// Runs every point of a campaign experiment and returns the CSV text.
pub fn campaign_csv(spec: &RunSpec) -> Result<(String, Vec<(Point, CampaignResult)>)> {
    let points = expand(spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs(spec))
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))?;
    let results = pool.install(|| points.par_iter().map(run_point).collect::<Result<Vec<_>>>())?;
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for (p, r) in points.iter().zip(&results) {
        csv.push_str(&csv_row(&p.config, r));
        csv.push('\n');
    }
    Ok((csv, points.into_iter().zip(results).collect()))
}

fn render_summary(rows: &[(Point, CampaignResult)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>5} {:>4} {:>3} {:>3} {:>6} {:>7} {:>8} {:>8} {:>10} {:>10} {:>10} {:>10}",
        "K", "N", "S", "R", "theta", "w_avg", "trials", "failures", "p_f", "p_zc", "approx", "rel_err"
    );
    for (_, r) in rows {
        let theta = r.theta.map_or("-".to_string(), |t| format!("{t:.2}"));
        let err = r.mean_rel_error.map_or("-".to_string(), |e| format!("{e:.3e}"));
        let _ = writeln!(
            out,
            "{:>5} {:>4} {:>3} {:>3} {:>6} {:>7.3} {:>8} {:>8} {:>10.3e} {:>10.3e} {:>10.3e} {:>10}",
            r.k, r.workers, r.stragglers, r.extra, theta, r.w_avg, r.trials_run, r.failures, r.p_f, r.p_zc,
            r.approx_p_zc, err
        );
    }
    out
}

fn run_matmul(spec: &RunSpec, log: &mut dyn Write) -> Result<RunSummary> {
    let o = &spec.overrides;
    let a_path = o.a.as_ref().ok_or_else(|| Error::config("a", "matmul needs --a <file>"))?;
    let b_path = o.b.as_ref().ok_or_else(|| Error::config("b", "matmul needs --b <file>"))?;
    let a = read_matrix(a_path)?.to_dense();
    let b = read_matrix(b_path)?.to_dense();
    if a.rows() != b.rows() {
        return Err(Error::config(
            "b",
            format!("A has {} rows but B has {}; AᵀB needs equal row counts", a.rows(), b.rows()),
        ));
    }
    let (m, n) = (o.m.unwrap_or(2), o.n.unwrap_or(2));
    let s = o.stragglers.unwrap_or(0);
    let workers = o.workers.unwrap_or(m * n + s);
    let extra = match o.extra_computations.as_deref() {
        None => 0,
        Some([r]) => *r,
        Some(_) => return Err(Error::config("extra_computations", "matmul takes a single value")),
    };
    let resolve = |spec: &Option<WeightSpec>, max| spec.clone().unwrap_or(WeightSpec::Dense).resolve(max);
    let sys = SystemConfig::new(m, n, workers, s)?
        .with_shape(a.rows(), a.cols(), b.cols())
        .with_worker_dists(resolve(&o.udist, m)?, resolve(&o.vdist, n)?)
        .with_extra(extra, resolve(&o.master_udist, m)?, resolve(&o.master_vdist, n)?)
        .with_coeff(o.coeff_dist.unwrap_or_default());
    sys.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let stragglers = random_stragglers(&sys, &mut rng);
    let tol = o.rank_tol.map_or(RankTolerance::Default, RankTolerance::Absolute);
    let runtime = Runtime::new(jobs(spec)).with_rank_tolerance(tol);
    let (c_hat, metrics) = runtime.orchestrate(&sys, &a, &b, &stragglers, &mut rng)?;
    let output = spec.output();
    write_matrix(&output, &Matrix::Dense(c_hat))?;

    let mut table = String::new();
    let _ = writeln!(table, "stragglers: {stragglers:?}");
    let _ = writeln!(table, "results collected: {}", metrics.results_collected);
    let _ = writeln!(table, "per-node comm (nnz): {:?}", metrics.per_node_comm);
    let _ = writeln!(table, "per-node flops: {:?}", metrics.per_node_flops);
    let _ = writeln!(table, "encode flops: {}", metrics.encode_flops);
    let _ = writeln!(table, "decode flops: {}", metrics.decode_flops);
    let _ = writeln!(log, "# wrote {}", output.display());
    Ok(RunSummary { output, csv: None, table })
}

/// Runs `spec`, writing the resolved parameters to `log`.
pub fn run(spec: &RunSpec, log: &mut dyn Write) -> Result<RunSummary> {
    presets::check_applicable(spec.experiment, &spec.overrides)?;
    echo_spec(spec, log);
    if spec.experiment == Experiment::Matmul {
        return run_matmul(spec, log);
    }
    let (csv, rows) = campaign_csv(spec)?;
    let output = spec.output();
    write_text(&output, &csv)?;
    let _ = writeln!(log, "# wrote {} ({} points)", output.display(), rows.len());
    Ok(RunSummary {
        output,
        csv: Some(csv),
        table: render_summary(&rows),
    })
}
