use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use pep_select::{Family, ModelPrior, PriorSpec, TrainingSize};

#[derive(Debug, Parser)]
#[command(name = "pep-select", version, about = "Bayesian variable selection under PEP and related g-priors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Common {
    /// Input CSV with a header row.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,

    /// Name of the response column.
    #[arg(long, global = true, default_value = "y")]
    pub response: String,

    #[arg(long, global = true, value_enum, default_value_t = PriorArg::Pep)]
    pub prior: PriorArg,

    /// Power parameter δ (PEP); defaults to n.
    #[arg(long, global = true)]
    pub delta: Option<f64>,

    /// Imaginary training size: `n`, `minimal` or a number.
    #[arg(long, global = true, value_parser = parse_nstar)]
    pub nstar: Option<NStar>,

    #[arg(long, global = true, default_value_t = 0.0)]
    pub d0: f64,

    #[arg(long, global = true, default_value_t = 0.0)]
    pub d1: f64,

    /// Fixed g for `--prior g-prior`; defaults to n.
    #[arg(long, global = true)]
    pub g: Option<f64>,

    #[arg(long, global = true, value_enum, default_value_t = ModelPriorArg::Uniform)]
    pub model_prior: ModelPriorArg,

    #[arg(long, global = true, default_value_t = 100_000)]
    pub iters: usize,

    #[arg(long, global = true, default_value_t = 10_000)]
    pub burnin: usize,

    #[arg(long, global = true, default_value_t = 1)]
    pub thin: usize,

    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Output directory; nothing is written outside it.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Command {
    /// Posterior probabilities of every model.
    Enumerate,
    /// MC3 over the marginal likelihoods.
    Mc3(SamplerArgs),
    /// MC3 with g drawn from its posterior under the current model.
    Mc3g(SamplerArgs),
    /// Gibbs variable selection over all parameters.
    Gibbs(GibbsArgs),
    /// Model-averaged predictions at new covariate values.
    Predict(PredictArgs),
    /// Cross-validated log predictive score.
    Lps(LpsArgs),
    /// Generate simulation datasets and optionally run the replicate study.
    Simulate(SimulateArgs),
    /// Prior and posterior moments of g and w for one model.
    Shrinkage(ShrinkageArgs),
    /// Repeat the run recorded in a manifest.
    #[serde(skip)]
    Rerun(RerunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Enumerate => "enumerate",
            Command::Mc3(_) => "mc3",
            Command::Mc3g(_) => "mc3g",
            Command::Gibbs(_) => "gibbs",
            Command::Predict(_) => "predict",
            Command::Lps(_) => "lps",
            Command::Simulate(_) => "simulate",
            Command::Shrinkage(_) => "shrinkage",
            Command::Rerun(_) => "rerun",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    /// A manifest.json written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Everything that determines a run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SamplerArgs {
    /// Also write the kept states.
    #[arg(long, value_enum)]
    pub trace: Option<TraceFormat>,

    #[arg(long, value_enum, default_value_t = ScanArg::Systematic)]
    pub scan: ScanArg,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GibbsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub sampler: SamplerArgs,

    /// Scale of the pseudoprior standard errors.
    #[arg(long, default_value_t = 1.0)]
    pub inflate: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    /// CSV of new covariate values, columns named as in the training data.
    #[arg(long)]
    pub new: PathBuf,

    #[arg(long, value_enum, default_value_t = Engine::Enumerate)]
    pub engine: Engine,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LpsArgs {
    #[arg(long, default_value_t = 5)]
    pub folds: usize,

    #[arg(long, value_enum, default_value_t = Engine::Enumerate)]
    pub engine: Engine,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=2))]
    pub scenario: u32,

    #[arg(long, default_value_t = 50)]
    pub n: usize,

    #[arg(long, default_value_t = 15)]
    pub p: usize,

    #[arg(long, default_value_t = 20)]
    pub replicates: usize,

    /// Enumerate every replicate under PEP and intrinsic priors with both
    /// model priors.
    #[arg(long)]
    pub study: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ShrinkageArgs {
    /// Model as an inclusion bitstring (`0110`) or comma-separated names.
    #[arg(long)]
    pub model: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorArg {
    Pep,
    Epp,
    Intrinsic,
    HyperG,
    HyperGn,
    Robust,
    Benchmark,
    GPrior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelPriorArg {
    Uniform,
    UniformDim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFormat {
    Binary,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanArg {
    Systematic,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Enumerate,
    Gibbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NStar {
    N,
    Minimal,
    Fixed(usize),
}

fn parse_nstar(s: &str) -> Result<NStar, String> {
    match s {
        "n" => Ok(NStar::N),
        "minimal" => Ok(NStar::Minimal),
        _ => s
            .parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .map(NStar::Fixed)
            .ok_or_else(|| format!("expected `n`, `minimal` or a positive integer, got `{s}`")),
    }
}

impl Common {
    pub fn prior_spec(&self) -> PriorSpec {
        let family = match self.prior {
            PriorArg::Pep => Family::Pep,
            PriorArg::Epp => Family::Epp,
            PriorArg::Intrinsic => Family::Intrinsic,
            PriorArg::HyperG => Family::HyperG,
            PriorArg::HyperGn => Family::HyperGN,
            PriorArg::Robust => Family::Robust,
            PriorArg::Benchmark => Family::Benchmark,
            PriorArg::GPrior => Family::FixedG,
        };
        let mut spec = PriorSpec::new(family);
        spec.delta = self.delta;
        if let Some(ns) = self.nstar {
            spec.n_star = match ns {
                NStar::N => TrainingSize::Full,
                NStar::Minimal => TrainingSize::Minimal,
                NStar::Fixed(m) => TrainingSize::Fixed(m),
            };
        }
        spec.d0 = self.d0;
        spec.d1 = self.d1;
        spec.g_fixed = self.g;
        spec
    }

    pub fn model_prior(&self) -> ModelPrior {
        match self.model_prior {
            ModelPriorArg::Uniform => ModelPrior::Uniform,
            ModelPriorArg::UniformDim => ModelPrior::UniformOnDimension,
        }
    }
}
