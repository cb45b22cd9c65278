//! Command-line runner for balanced distribution adaptation experiments.
//!
//! Three subcommands:
//! - `run`: execute one or more methods from the registry (raw-1nn, pca,
//!   tca, jda, bda, wbda) on a source/target pair and emit a report.
//! - `sweep`: trace the balance-factor grid for one method and emit the
//!   (mu, accuracy) curve with per-mu MMD traces.
//! - `gen`: write a synthetic shifted dataset pair (plus truth labels) for
//!   desk-scale experiments.
//!
//! Reports are JSON (versioned schema, full resolved config echo) or CSV
//! (`method,mu,lambda,dim,iteration,accuracy,mmd_distance`). Exit code 0 on
//! success, 1 on any failure; partial results are still written with
//! per-entry error fields.

mod manifest;
mod methods;
mod report;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bda", version, about = "Balanced distribution adaptation runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run selected methods on a source/target pair and report results.
    Run(RunArgs),
    /// Trace the balance-factor grid for one method.
    Sweep(SweepArgs),
    /// Generate a synthetic shifted source/target/truth triple.
    Gen(GenArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    /// Use the raw feature matrix directly.
    Primal,
    /// Dot-product Gram matrix.
    Linear,
    /// Gaussian kernel; bandwidth from --gamma (default 1 / feature count).
    Rbf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// 1-NN on jointly standardized features, no adaptation.
    #[value(name = "raw-1nn")]
    RawNn,
    /// 1-NN on a principal-component projection, no adaptation.
    Pca,
    /// Marginal-only adaptation (balance factor 0).
    Tca,
    /// Equal-weight joint adaptation (balance factor 0.5).
    Jda,
    /// Balanced adaptation; sweeps the balance factor when truth is given.
    Bda,
    /// Prior-weighted balanced adaptation; sweeps like bda.
    Wbda,
}

impl MethodArg {
    pub fn name(self) -> &'static str {
        match self {
            MethodArg::RawNn => "raw-1nn",
            MethodArg::Pca => "pca",
            MethodArg::Tca => "tca",
            MethodArg::Jda => "jda",
            MethodArg::Bda => "bda",
            MethodArg::Wbda => "wbda",
        }
    }
}

#[derive(Args)]
pub struct CommonArgs {
    /// Source dataset: CSV (labels in the last column) or binary.
    #[arg(long)]
    pub source: PathBuf,

    /// Target dataset: CSV or binary, features only.
    #[arg(long)]
    pub target: PathBuf,

    /// True target labels (single-column CSV, last column of a wider CSV,
    /// or labeled binary); enables accuracy reporting and best-mu search.
    #[arg(long)]
    pub truth: Option<PathBuf>,

    /// Balance factor between marginal and class-conditional alignment.
    #[arg(long, default_value_t = 0.5)]
    pub mu: f64,

    /// Regularization strength.
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,

    /// Projection dimensionality.
    #[arg(long, default_value_t = 100)]
    pub dim: usize,

    /// Refinement iterations.
    #[arg(long, default_value_t = 10)]
    pub iters: usize,

    /// Feature-space treatment.
    #[arg(long, value_enum, default_value_t = KernelArg::Linear)]
    pub kernel: KernelArg,

    /// RBF bandwidth; defaults to 1 / feature count when --kernel rbf.
    #[arg(long)]
    pub gamma: Option<f64>,

    /// Use prior-weighted class alignment for the sweep command.
    #[arg(long)]
    pub weighted: bool,

    /// Recorded in the config echo; generation seeds live on `gen`.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Worker-thread cap for concurrent method/grid execution.
    #[arg(long, env = "BDA_WORKERS")]
    pub workers: Option<usize>,

    /// Report destination; "-" writes to stdout.
    #[arg(long, default_value = "-")]
    pub out: String,

    /// Report encoding.
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Methods to run, in report order.
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_values_t = [MethodArg::Bda]
    )]
    pub methods: Vec<MethodArg>,

    /// Balance-factor grid used by bda/wbda best-mu search.
    #[arg(long, value_delimiter = ',', default_values_t = methods::DEFAULT_GRID)]
    pub grid: Vec<f64>,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Balance-factor grid to trace.
    #[arg(long, value_delimiter = ',', default_values_t = methods::DEFAULT_GRID)]
    pub grid: Vec<f64>,
}

#[derive(Args)]
pub struct GenArgs {
    /// Number of classes.
    #[arg(long, default_value_t = 2)]
    pub classes: usize,

    /// Feature dimensionality; defaults to twice the class count so
    /// class-conditional shift axes stay clear of class-mean axes.
    #[arg(long)]
    pub features: Option<usize>,

    /// Per-class source sample counts, e.g. 30,30.
    #[arg(long, value_delimiter = ',', conflicts_with = "source_priors")]
    pub source_counts: Option<Vec<usize>>,

    /// Per-class target sample counts.
    #[arg(long, value_delimiter = ',', conflicts_with = "target_priors")]
    pub target_counts: Option<Vec<usize>>,

    /// Per-class source priors (used with --source-total), e.g. 0.9,0.1.
    #[arg(long, value_delimiter = ',', requires = "source_total")]
    pub source_priors: Option<Vec<f64>>,

    /// Total source samples when using --source-priors.
    #[arg(long)]
    pub source_total: Option<usize>,

    /// Per-class target priors (used with --target-total).
    #[arg(long, value_delimiter = ',', requires = "target_total")]
    pub target_priors: Option<Vec<f64>>,

    /// Total target samples when using --target-priors.
    #[arg(long)]
    pub target_total: Option<usize>,

    /// Distance between neighboring class means.
    #[arg(long, default_value_t = 3.0)]
    pub class_sep: f64,

    /// Uniform marginal shift magnitude applied to every target sample.
    #[arg(long, default_value_t = 0.0)]
    pub marginal: f64,

    /// Class-conditional shift magnitude (centered to leave the marginal
    /// mean fixed).
    #[arg(long, default_value_t = 0.0)]
    pub conditional: f64,

    /// Within-class noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,

    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output path for the labeled source CSV.
    #[arg(long)]
    pub source_out: PathBuf,

    /// Output path for the target feature CSV.
    #[arg(long)]
    pub target_out: PathBuf,

    /// Output path for the single-column target truth CSV.
    #[arg(long)]
    pub truth_out: PathBuf,
}

fn configure_workers(workers: Option<usize>) {
    if let Some(n) = workers {
        if n > 0 {
            // A failure here means a pool already exists (e.g. repeated
            // calls in tests); the default pool is a fine fallback.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(args) => {
            configure_workers(args.common.workers);
            methods::cmd_run(&args)
        }
        Command::Sweep(args) => {
            configure_workers(args.common.workers);
            methods::cmd_sweep(&args)
        }
        Command::Gen(args) => methods::cmd_gen(&args),
    };
    ExitCode::from(code)
}
