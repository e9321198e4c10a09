//! Command-line pipeline: generate data, train models, evaluate with
//! repeated splits, cross-validate hyperparameters, apply the tensor product,
//! and emit CMC curves. All randomized steps are seeded; every output except
//! the wall-clock columns of `eval` is byte-reproducible.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use tldakit::Result;

#[derive(Parser)]
#[command(
    name = "tldakit",
    version,
    about = "Transform-domain tensor linear discriminant analysis toolkit"
)]
struct Cli {
    /// Worker threads for per-slice training. Falls back to the
    /// TLDAKIT_THREADS environment variable, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Flat key=value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled tensor dataset (TNS3 + labels sidecar).
    Gen(commands::GenArgs),
    /// Train a model and write a TLDA model file.
    Train(commands::TrainArgs),
    /// Repeated split/train/test protocol; writes a CSV report.
    Eval(commands::EvalArgs),
    /// k-fold cross-validation over a K or gamma grid.
    Cv(commands::CvArgs),
    /// Tensor-tensor product of two TNS3 files.
    Product(commands::ProductArgs),
    /// Cumulative match characteristic curve for a trained model.
    Cmc(commands::CmcArgs),
}

fn run(cli: Cli) -> Result<()> {
    let settings = config::Settings::load(cli.config.as_deref())?;
    let threads = config::resolve_opt(cli.threads, &settings, "threads")?.or_else(|| {
        std::env::var("TLDAKIT_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| tldakit::Error::invalid(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Gen(args) => commands::gen(args, &settings),
        Command::Train(args) => commands::train(args, &settings),
        Command::Eval(args) => commands::eval(args, &settings),
        Command::Cv(args) => commands::cv(args, &settings),
        Command::Product(args) => commands::product(args, &settings),
        Command::Cmc(args) => commands::cmc(args, &settings),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: kind={} msg={:?}", err.kind(), err.to_string());
        std::process::exit(1);
    }
}
