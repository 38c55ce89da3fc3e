use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "dsm",
    version,
    about = "Distribution separation and mixture-model feedback experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Separate a mixture distribution from a seed irrelevance distribution.
    Separate(SeparateArgs),
    /// Emit rho, KL, symmetrized KL and JS along a descending lambda grid.
    Profile(ProfileArgs),
    /// Fit the mixture feedback model by EM.
    Mmf(MmfArgs),
    /// Compare retrieval methods by MAP on a collection.
    Experiment(ExperimentArgs),
    /// Write a synthetic corpus, queries and qrels.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    /// lambda = lambda_L
    Lower,
    /// minimum squared correlation
    MinRho2,
}

#[derive(Debug, Args)]
pub struct Common {
    /// key=value file whose entries act as flags; flags on the command line win.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, short, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Mixture distribution, CSV `term,prob`.
    #[arg(long, value_name = "FILE")]
    pub mixture: PathBuf,
    /// Seed irrelevance distribution, CSV `term,prob`.
    #[arg(long = "seed-dist", value_name = "FILE")]
    pub seed_dist: PathBuf,
    /// Add eps to every entry of both inputs and renormalize.
    #[arg(long, value_name = "EPS")]
    pub smooth: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SeparateArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long, value_enum, default_value_t = StrategyArg::Lower)]
    pub strategy: StrategyArg,
    /// Separate at max(LAMBDA, lambda_L); overrides --strategy.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Number of log-spaced grid points from 1 down to lambda_L.
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    /// Explicit descending grid, comma separated; overrides --points.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MmfArgs {
    /// Feedback term counts, CSV `term,count`.
    #[arg(long, value_name = "FILE")]
    pub counts: PathBuf,
    /// Collection model, CSV `term,prob`.
    #[arg(long, value_name = "FILE")]
    pub background: PathBuf,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 10_000)]
    pub max_iter: usize,
    /// Also report the gap to the closed-form separation.
    #[arg(long = "compare-closed")]
    pub compare_closed: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long = "num-docs")]
    pub num_docs: Option<usize>,
    #[arg(long = "doc-length")]
    pub doc_length: Option<usize>,
    #[arg(long = "num-queries")]
    pub num_queries: Option<usize>,
    #[arg(long = "vocab-size")]
    pub vocab_size: Option<usize>,
    #[arg(long = "topic-terms")]
    pub topic_terms: Option<usize>,
    #[arg(long = "relevant-fraction")]
    pub relevant_fraction: Option<f64>,
    /// Topic share inside relevant documents.
    #[arg(long = "lambda-gen")]
    pub lambda_gen: Option<f64>,
    /// Per-query topic shares vary uniformly by this much around --lambda-gen.
    #[arg(long = "lambda-spread")]
    pub lambda_spread: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Generate the collection instead of reading files.
    #[arg(long, conflicts_with_all = ["corpus", "queries", "qrels"])]
    pub synthetic: bool,
    #[command(flatten)]
    pub synth: SynthArgs,
    /// JSONL corpus with `doc_id` and `terms`.
    #[arg(long, value_name = "FILE", required_unless_present = "synthetic")]
    pub corpus: Option<PathBuf>,
    /// TSV `query_id<TAB>terms`.
    #[arg(long, value_name = "FILE", required_unless_present = "synthetic")]
    pub queries: Option<PathBuf>,
    /// TREC qrels.
    #[arg(long, value_name = "FILE", required_unless_present = "synthetic")]
    pub qrels: Option<PathBuf>,
    /// Comma-separated methods; the first is the baseline.
    /// Known: ql, mmf:L, dsm-fixed:L, dsm-, dsm, mmf-grid-best.
    #[arg(long, value_delimiter = ',', default_value = "mmf-grid-best,dsm-fixed:0.5,dsm-,dsm")]
    pub methods: Vec<String>,
    #[arg(long = "top-k", default_value_t = 10)]
    pub top_k: usize,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 1000)]
    pub depth: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 10_000)]
    pub resamples: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub synth: SynthArgs,
    /// Directory receiving corpus.jsonl, queries.tsv and qrels.txt.
    #[arg(long = "out-dir", value_name = "DIR")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub common: Common,
}
