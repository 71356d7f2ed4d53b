use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use facstat_core::config::CONFIG_ENV;
use facstat_core::dataset::{Field, Target};
use facstat_core::nltv::{NltvParams, CLUSTER_FIELDS};
use facstat_core::regress::MethodTag;
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "facstat", version, about = "Statistics, classifiers and clustering for faculty records")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Report format written to stdout.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// Master seed; split, init and generator seeds derive from it.
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
    /// TOML file with cohort tables and generator profiles.
    #[arg(long, env = CONFIG_ENV, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for the report copy and auxiliary files.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Md,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Md => "md",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Summaries, percentiles, moment matrices, histograms and densities.
    Eda(EdaArgs),
    /// Seven regression methods over fourteen predictor combinations.
    Regress(RegressArgs),
    /// Softmax classifier for rank.
    Softmax(SoftmaxArgs),
    /// Nonlocal total-variation clustering.
    Cluster(ClusterArgs),
    /// Synthetic faculty records drawn from per-institution moments.
    Synth(SynthArgs),
    /// Rerun the command recorded in a report.
    #[serde(skip)]
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Eda(_) => "eda",
            Command::Regress(_) => "regress",
            Command::Softmax(_) => "softmax",
            Command::Cluster(_) => "cluster",
            Command::Synth(_) => "synth",
            Command::Replay(_) => "replay",
        }
    }

    pub fn source(&self) -> Option<&Source> {
        match self {
            Command::Eda(a) => Some(&a.source),
            Command::Regress(a) => Some(&a.source),
            Command::Softmax(a) => Some(&a.source),
            Command::Cluster(a) => Some(&a.source),
            Command::Synth(_) | Command::Replay(_) => None,
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    /// Faculty CSV file.
    #[arg(long)]
    pub input: PathBuf,
    /// Keep only this university.
    #[arg(long)]
    pub university: Option<String>,
    /// Keep only members of this cohort tag.
    #[arg(long)]
    pub cohort: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum By {
    All,
    University,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_enum, default_value_t = By::All, conflicts_with = "cohorts")]
    pub by: By,
    /// Group by cohort tags instead, e.g. `public,private`.
    #[arg(long, value_delimiter = ',')]
    pub cohorts: Vec<String>,
    /// Fields for the moment matrices and series.
    #[arg(long, default_value = "all")]
    pub fields: FieldSet,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub bins: u64,
    /// KDE bandwidth; Silverman's rule when absent.
    #[arg(long, value_parser = positive)]
    pub bandwidth: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "5,10,25,50,75,90,95")]
    pub probes: Vec<f64>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, default_value = "rank")]
    pub target: Target,
    /// Restrict to one predictor combination (1-14).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=14))]
    pub combo: Option<u8>,
    /// Restrict to one method (LnR, LgR, PoR, RR, LR, ENR, ByR).
    #[arg(long)]
    pub method: Option<MethodTag>,
    #[arg(long, default_value_t = 0.7, value_parser = fraction)]
    pub train_fraction: f64,
    #[arg(long, value_enum, default_value_t = By::All)]
    pub by: By,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxArgs {
    #[command(flatten)]
    pub source: Source,
    /// Train on the first N records and test on the rest.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub train: Option<u64>,
    /// Seeded training fraction, used when `--train` is absent.
    #[arg(long, default_value_t = 0.7, value_parser = fraction)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: u64,
    #[arg(long, default_value_t = 0.1, value_parser = positive)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-3, value_parser = nonnegative)]
    pub reg: f64,
    /// `all` or a list such as `pubs,cites,h`.
    #[arg(long, default_value = "all")]
    pub features: FieldSet,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub clusters: u64,
    /// `cosine`, `mixed` or `custom(alpha_euclid,alpha_cosine,lambda)`.
    #[arg(long, default_value = "cosine", value_parser = params)]
    pub params: String,
    #[arg(long, default_value = "all")]
    pub fields: FieldSet,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthArgs {
    /// Number of records.
    #[arg(long, default_value_t = 444, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: u64,
}

#[derive(Args, Debug, Clone, PartialEq, Default)]
pub struct ReplayArgs {
    /// Report written by an earlier run.
    pub report: PathBuf,
}

/// `all` or an explicit comma-separated field list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSet {
    All,
    List(Vec<Field>),
}

impl FieldSet {
    pub fn resolve(&self, all: &[Field]) -> Vec<Field> {
        match self {
            FieldSet::All => all.to_vec(),
            FieldSet::List(v) => v.clone(),
        }
    }
}

impl FromStr for FieldSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(FieldSet::All);
        }
        let mut out: Vec<Field> = Vec::new();
        for part in s.split(',') {
            let f: Field = part.parse().map_err(|e: facstat_core::Error| e.to_string())?;
            if out.contains(&f) {
                return Err(format!("field `{f}` listed twice"));
            }
            out.push(f);
        }
        Ok(FieldSet::List(out))
    }
}

/// Fields used by the classifiers and clustering when `all` is given.
pub const NON_RANK_FIELDS: [Field; 5] = CLUSTER_FIELDS;

fn fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie strictly between 0 and 1, got {v}"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive and finite, got {v}"))
    }
}

fn nonnegative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be nonnegative and finite, got {v}"))
    }
}

fn params(s: &str) -> Result<String, String> {
    let p = NltvParams::parse(s, 1).map_err(|e| e.to_string())?;
    p.validate().map_err(|e| e.to_string())?;
    Ok(s.trim().to_string())
}
