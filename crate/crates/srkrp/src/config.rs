//! Run specifications: experiment choice, parameter overrides and the TOML
//! config file format.
//!
//! A config file is a flat TOML table:
//!
//! ```toml
//! experiment = "fig5"
//! seed = 7
//! theta = [0.5, 1.0]
//! udist = "simplest(3)"
//! vdist = [[2, 0.5], [4, 0.5]]
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use srkrp_core::analysis::{ErrorNorm, LogBase};
use srkrp_core::weights::{CoefficientDistribution, WeightSpec};
use toml::Value;

use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Fig1,
    Fig2_3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Custom,
    Matmul,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Fig1,
        Experiment::Fig2_3,
        Experiment::Fig4,
        Experiment::Fig5,
        Experiment::Fig6,
        Experiment::Fig7,
        Experiment::Custom,
        Experiment::Matmul,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2_3 => "fig2_3",
            Experiment::Fig4 => "fig4",
            Experiment::Fig5 => "fig5",
            Experiment::Fig6 => "fig6",
            Experiment::Fig7 => "fig7",
            Experiment::Custom => "custom",
            Experiment::Matmul => "matmul",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == key || (key == "fig2" || key == "fig3") && *e == Experiment::Fig2_3)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                Error::config("experiment", format!("unknown experiment `{s}` (one of {})", names.join(", ")))
            })
    }
}

/// Parameter overrides; `None` keeps the experiment's default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub workers: Option<usize>,
    pub stragglers: Option<usize>,
    pub extra_computations: Option<Vec<usize>>,
    pub theta: Option<Vec<f64>>,
    pub w_star_avg: Option<Vec<f64>>,
    pub udist: Option<WeightSpec>,
    pub vdist: Option<WeightSpec>,
    pub master_udist: Option<WeightSpec>,
    pub master_vdist: Option<WeightSpec>,
    pub coeff_dist: Option<CoefficientDistribution>,
    pub norm: Option<ErrorNorm>,
    pub log_base: Option<LogBase>,
    pub rank_tol: Option<f64>,
    pub trials_max: Option<u64>,
    pub target_failures: Option<u64>,
    pub a: Option<PathBuf>,
    pub b: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($low:ident, $high:ident; $($f:ident),*) => {
        Overrides { $($f: $high.$f.or($low.$f)),* }
    };
}

impl Overrides {
    /// Field-wise merge where `higher` wins.
    pub fn merged_with(self, higher: Overrides) -> Overrides {
        let low = self;
        merge_fields!(low, higher; m, n, workers, stragglers, extra_computations, theta, w_star_avg,
            udist, vdist, master_udist, master_vdist, coeff_dist, norm, log_base, rank_tol,
            trials_max, target_failures, a, b)
    }

    /// `(key, value)` for every override that is set, in a fixed order.
    pub fn set_keys(&self) -> Vec<(&'static str, String)> {
        fn list<T: fmt::Display>(v: &[T]) -> String {
            let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            format!("[{}]", items.join(", "))
        }
        let mut out = Vec::new();
        macro_rules! push {
            ($key:literal, $v:expr) => {
                if let Some(v) = &$v {
                    out.push(($key, v.to_string()));
                }
            };
            ($key:literal, list $v:expr) => {
                if let Some(v) = &$v {
                    out.push(($key, list(v)));
                }
            };
            ($key:literal, path $v:expr) => {
                if let Some(v) = &$v {
                    out.push(($key, v.display().to_string()));
                }
            };
        }
        push!("m", self.m);
        push!("n", self.n);
        push!("workers", self.workers);
        push!("stragglers", self.stragglers);
        push!("extra_computations", list self.extra_computations);
        push!("theta", list self.theta);
        push!("w_star_avg", list self.w_star_avg);
        push!("udist", self.udist);
        push!("vdist", self.vdist);
        push!("master_udist", self.master_udist);
        push!("master_vdist", self.master_vdist);
        push!("coeff_dist", self.coeff_dist);
        if let Some(n) = self.norm {
            out.push(("norm", n.name().to_string()));
        }
        if let Some(b) = self.log_base {
            out.push(("log_base", b.name().to_string()));
        }
        push!("rank_tol", self.rank_tol);
        push!("trials_max", self.trials_max);
        push!("target_failures", self.target_failures);
        push!("a", path self.a);
        push!("b", path self.b);
        out
    }
}

/// Everything needed to reproduce one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub experiment: Experiment,
    pub overrides: Overrides,
    /// Defaults to `<experiment>.csv` (`product.mtx` for matmul).
    pub output_path: Option<PathBuf>,
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
}

impl RunSpec {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            overrides: Overrides::default(),
            output_path: None,
            seed: DEFAULT_SEED,
            jobs: None,
        }
    }

    pub fn output(&self) -> PathBuf {
        self.output_path.clone().unwrap_or_else(|| match self.experiment {
            Experiment::Matmul => PathBuf::from("product.mtx"),
            e => PathBuf::from(format!("{}.csv", e.name())),
        })
    }
}

/// A parsed config file; every field is optional so command-line flags can
/// fill the gaps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigDocument {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub output: Option<PathBuf>,
    pub overrides: Overrides,
}

pub const CONFIG_KEYS: &[&str] = &[
    "experiment",
    "seed",
    "jobs",
    "output",
    "m",
    "n",
    "workers",
    "stragglers",
    "extra_computations",
    "theta",
    "w_star_avg",
    "udist",
    "vdist",
    "master_udist",
    "master_vdist",
    "coeff_dist",
    "norm",
    "log_base",
    "rank_tol",
    "trials_max",
    "target_failures",
    "a",
    "b",
];

/// 1-based line on which `key` is assigned, if it can be found.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        let rest = l
            .strip_prefix(key)
            .or_else(|| l.strip_prefix(&format!("\"{key}\"")))
            .or_else(|| l.strip_prefix(&format!("'{key}'")));
        rest.is_some_and(|r| r.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

struct Doc<'a> {
    text: &'a str,
}

impl Doc<'_> {
    fn err(&self, key: &str, reason: impl Into<String>) -> Error {
        Error::Config {
            line: line_of(self.text, key),
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    fn uint(&self, key: &str, v: &Value) -> Result<u64> {
        match v {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            _ => Err(self.err(key, "expected a non-negative integer")),
        }
    }

    fn usize(&self, key: &str, v: &Value) -> Result<usize> {
        Ok(self.uint(key, v)? as usize)
    }

    fn real(&self, key: &str, v: &Value) -> Result<f64> {
        match v {
            Value::Float(x) => Ok(*x),
            Value::Integer(i) => Ok(*i as f64),
            _ => Err(self.err(key, "expected a number")),
        }
    }

    fn string<'v>(&self, key: &str, v: &'v Value) -> Result<&'v str> {
        v.as_str().ok_or_else(|| self.err(key, "expected a string"))
    }

    fn one_or_many<T>(&self, key: &str, v: &Value, f: impl Fn(&Value) -> Result<T>) -> Result<Vec<T>> {
        match v {
            Value::Array(items) if items.is_empty() => Err(self.err(key, "empty list")),
            Value::Array(items) => items.iter().map(f).collect(),
            other => Ok(vec![f(other)?]),
        }
    }

    fn parsed<T: FromStr>(&self, key: &str, v: &Value) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let s = self.string(key, v)?;
        s.parse().map_err(|e: T::Err| self.err(key, e.to_string()))
    }

    /// String shorthand or a list of `[weight, probability]` pairs.
    fn weight_spec(&self, key: &str, v: &Value) -> Result<WeightSpec> {
        match v {
            Value::String(s) => s.parse().map_err(|e: srkrp_core::Error| self.err(key, e.to_string())),
            Value::Array(items) => {
                let pairs = items
                    .iter()
                    .map(|item| match item.as_array().map(Vec::as_slice) {
                        Some([w, p]) => Ok((self.usize(key, w)?, self.real(key, p)?)),
                        _ => Err(self.err(key, "expected [weight, probability] pairs")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(WeightSpec::Pairs(pairs))
            }
            _ => Err(self.err(key, "expected a distribution string or a list of pairs")),
        }
    }
}

/// Parses a config file. Unknown keys and ill-typed values are errors that
/// name the key and, where possible, its line.
pub fn parse_config_document(text: &str) -> Result<ConfigDocument> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config {
        line: e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1),
        key: String::from("<syntax>"),
        reason: e.message().trim().to_string(),
    })?;
    let doc = Doc { text };
    let mut out = ConfigDocument::default();
    let o = &mut out.overrides;
    for (key, v) in &table {
        let k = key.as_str();
        match k {
            "experiment" => out.experiment = Some(doc.parsed(k, v)?),
            "seed" => out.seed = Some(doc.uint(k, v)?),
            "jobs" => out.jobs = Some(doc.usize(k, v)?),
            "output" => out.output = Some(PathBuf::from(doc.string(k, v)?)),
            "m" => o.m = Some(doc.usize(k, v)?),
            "n" => o.n = Some(doc.usize(k, v)?),
            "workers" => o.workers = Some(doc.usize(k, v)?),
            "stragglers" => o.stragglers = Some(doc.usize(k, v)?),
            "extra_computations" => o.extra_computations = Some(doc.one_or_many(k, v, |x| doc.usize(k, x))?),
            "theta" => o.theta = Some(doc.one_or_many(k, v, |x| doc.real(k, x))?),
            "w_star_avg" => o.w_star_avg = Some(doc.one_or_many(k, v, |x| doc.real(k, x))?),
            "udist" => o.udist = Some(doc.weight_spec(k, v)?),
            "vdist" => o.vdist = Some(doc.weight_spec(k, v)?),
            "master_udist" => o.master_udist = Some(doc.weight_spec(k, v)?),
            "master_vdist" => o.master_vdist = Some(doc.weight_spec(k, v)?),
            "coeff_dist" => o.coeff_dist = Some(doc.parsed(k, v)?),
            "norm" => o.norm = Some(doc.parsed(k, v)?),
            "log_base" => o.log_base = Some(doc.parsed(k, v)?),
            "rank_tol" => o.rank_tol = Some(doc.real(k, v)?),
            "trials_max" => o.trials_max = Some(doc.uint(k, v)?),
            "target_failures" => o.target_failures = Some(doc.uint(k, v)?),
            "a" => o.a = Some(PathBuf::from(doc.string(k, v)?)),
            "b" => o.b = Some(PathBuf::from(doc.string(k, v)?)),
            _ => return Err(doc.err(k, format!("unknown key (known keys: {})", CONFIG_KEYS.join(", ")))),
        }
    }
    Ok(out)
}

/// Parses a self-contained config file into a run specification; the file
/// must name its experiment.
pub fn parse_config(text: &str) -> Result<RunSpec> {
    let doc = parse_config_document(text)?;
    let experiment = doc
        .experiment
        .ok_or_else(|| Error::config("experiment", "missing; set it in the file or on the command line"))?;
    Ok(RunSpec {
        experiment,
        overrides: doc.overrides,
        output_path: doc.output,
        seed: doc.seed.unwrap_or(DEFAULT_SEED),
        jobs: doc.jobs,
    })
}
