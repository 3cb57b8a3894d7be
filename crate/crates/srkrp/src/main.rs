use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use srkrp::config::{parse_config_document, ConfigDocument, Experiment, Overrides, RunSpec, DEFAULT_SEED};
use srkrp::core_api::analysis::{ErrorNorm, LogBase};
use srkrp::core_api::weights::{CoefficientDistribution, WeightSpec};
use srkrp::runner;
use srkrp::Error;

#[derive(Parser)]
#[command(name = "srkrp", version, about = "Sparse random Khatri-Rao product code experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment preset (fig1, fig2_3, fig4, fig5, fig6, fig7, custom, matmul)
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment to run
    #[arg(value_name = "EXPERIMENT")]
    experiment_pos: Option<String>,
    #[arg(long, conflicts_with = "experiment_pos")]
    experiment: Option<String>,
    /// TOML file with run settings; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    trials_max: Option<u64>,
    #[arg(long)]
    target_failures: Option<u64>,
    /// CSV path, or the product matrix path for matmul
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    stragglers: Option<usize>,
    /// Master-local computations R (comma-separated list sweeps)
    #[arg(long, value_delimiter = ',')]
    extra_computations: Option<Vec<usize>>,
    /// Weight multiplier(s), w_avg = theta * log K
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    /// Master average weight(s) for fig6
    #[arg(long, value_delimiter = ',')]
    w_star: Option<Vec<f64>>,
    /// e.g. "simplest(3)", "dense", "point(2)", "2:0.5,4:0.5"
    #[arg(long)]
    udist: Option<WeightSpec>,
    #[arg(long)]
    vdist: Option<WeightSpec>,
    #[arg(long)]
    master_udist: Option<WeightSpec>,
    #[arg(long)]
    master_vdist: Option<WeightSpec>,
    /// uniform01 or standard_normal
    #[arg(long)]
    coeff_dist: Option<CoefficientDistribution>,
    /// spectral or frobenius
    #[arg(long)]
    norm: Option<ErrorNorm>,
    /// e, 2 or 10
    #[arg(long)]
    log_base: Option<LogBase>,
    /// Absolute singular value threshold for the rank test
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Matrix file for A (matmul)
    #[arg(long)]
    a: Option<PathBuf>,
    /// Matrix file for B (matmul)
    #[arg(long)]
    b: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            m: self.m,
            n: self.n,
            workers: self.workers,
            stragglers: self.stragglers,
            extra_computations: self.extra_computations.clone(),
            theta: self.theta.clone(),
            w_star_avg: self.w_star.clone(),
            udist: self.udist.clone(),
            vdist: self.vdist.clone(),
            master_udist: self.master_udist.clone(),
            master_vdist: self.master_vdist.clone(),
            coeff_dist: self.coeff_dist,
            norm: self.norm,
            log_base: self.log_base,
            rank_tol: self.rank_tol,
            trials_max: self.trials_max,
            target_failures: self.target_failures,
            a: self.a.clone(),
            b: self.b.clone(),
        }
    }

    fn into_spec(self) -> Result<RunSpec, Error> {
        let doc = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                    path: path.clone(),
                    source,
                })?;
                parse_config_document(&text)?
            }
            None => ConfigDocument::default(),
        };
        let experiment = match self.experiment_pos.as_deref().or(self.experiment.as_deref()) {
            Some(name) => name.parse::<Experiment>()?,
            None => doc
                .experiment
                .ok_or_else(|| Error::Config {
                    line: None,
                    key: "experiment".into(),
                    reason: "no experiment given".into(),
                })?,
        };
        let overrides = doc.overrides.merged_with(self.overrides());
        Ok(RunSpec {
            experiment,
            overrides,
            output_path: self.output.or(doc.output),
            seed: self.seed.or(doc.seed).unwrap_or(DEFAULT_SEED),
            jobs: self.jobs.or(doc.jobs),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run(args) = cli.command;
    let result = args.into_spec().and_then(|spec| runner::run(&spec, &mut std::io::stderr()));
    match result {
        Ok(summary) => {
            print!("{}", summary.table);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
