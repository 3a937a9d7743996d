//! `grammage`: generate, filter, split, train, evaluate, simulate, serve.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 on a runtime error.

mod cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "grammage", version, about = "Roll grammage classification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic roll dataset
    Gen(GenArgs),
    /// Split a dataset into inliers and outliers (elliptic envelope)
    Filter(FilterArgs),
    /// Stratified train/test split
    Split(SplitArgs),
    /// Train a model and save it as JSON
    Train(TrainArgs),
    /// Score a saved model on a labeled dataset
    Eval(EvalArgs),
    /// Train and score the four learners on one 70/30 split
    Compare(CompareArgs),
    /// Stratified k-fold cross-validation of one learner
    Cv(CvArgs),
    /// Run the PLC tag simulator
    Simulate(SimulateArgs),
    /// Run the live prediction service and its HTTP API
    Serve(ServeArgs),
    /// Read the current roll from the simulator, predict it and print one line
    PredictOnce(PredictOnceArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Number of rolls [default: 9589]
    #[arg(long)]
    n: Option<usize>,
    /// Fraction of rows given a gross sensor fault [default: 0.2]
    #[arg(long)]
    outlier_rate: Option<f64>,
    /// Fraction of rows given a wrong label [default: 0.01]
    #[arg(long)]
    label_noise: Option<f64>,
    /// Relative sensor noise (standard deviation) per channel [default: 0.01]
    #[arg(long)]
    sigma: Option<f64>,
    /// Generator key/value file; explicit flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the effective generator config to this file
    #[arg(long)]
    write_config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Output dataset (default: standard output)
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct FilterArgs {
    input: PathBuf,
    /// Fraction of rows to flag as outliers
    #[arg(long, default_value_t = 0.20)]
    contamination: f64,
    #[arg(long, default_value = "inliers.txt")]
    inliers: PathBuf,
    #[arg(long, default_value = "outliers.txt")]
    outliers: PathBuf,
}

#[derive(Debug, Args)]
struct SplitArgs {
    input: PathBuf,
    /// Training fraction, apportioned per class
    #[arg(long, default_value_t = 0.70)]
    ratio: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "train.txt")]
    train: PathBuf,
    #[arg(long, default_value = "test.txt")]
    test: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Learner {
    Tree,
    Forest,
    Adaboost,
    Knn,
}

/// Learner hyperparameters. Unset values take the learner's default.
#[derive(Debug, Args)]
struct LearnerArgs {
    #[arg(long, value_enum, default_value_t = Learner::Adaboost)]
    learner: Learner,
    /// Boosting stages
    #[arg(long, default_value_t = 10)]
    stages: usize,
    /// Boosting learning rate
    #[arg(long, default_value_t = 1.0)]
    lr: f64,
    /// Trees per forest [forest: 100, adaboost base forest: 10]
    #[arg(long)]
    trees: Option<usize>,
    /// Maximum tree depth [tree: 100, forest: 100, adaboost base: 1]
    #[arg(long)]
    depth: Option<usize>,
    /// Features tried per split [tree: 3, forest: 1, adaboost base: 1]
    #[arg(long)]
    features: Option<usize>,
    /// Neighbours for kNN
    #[arg(long, default_value_t = 5)]
    k: usize,
}

#[derive(Debug, Args)]
struct TrainArgs {
    input: PathBuf,
    #[command(flatten)]
    learner: LearnerArgs,
    #[arg(long)]
    seed: u64,
    /// Keep rows whose label is not one of the standard classes
    #[arg(long)]
    keep_nonstandard: bool,
    /// Model file to write
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Labeled dataset to score on
    input: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct CompareArgs {
    input: PathBuf,
    /// Learners to compare
    #[arg(long, value_enum, value_delimiter = ',', default_value = "tree,forest,adaboost,knn")]
    learners: Vec<Learner>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct CvArgs {
    input: PathBuf,
    #[command(flatten)]
    learner: LearnerArgs,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Listen address [default: $GRAMMAGE_SIM_ADDR or 127.0.0.1:10102]
    #[arg(long)]
    listen: Option<String>,
    /// Milliseconds between rolls
    #[arg(long, default_value_t = 2000, conflicts_with = "manual")]
    tick: u64,
    /// Advance only on ADVANCE requests
    #[arg(long)]
    manual: bool,
    #[arg(long)]
    seed: u64,
    /// Probability that a roll carries a gross sensor fault
    #[arg(long, default_value_t = 0.0)]
    fault_rate: f64,
    /// Generator key/value file for the roll stream
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Simulator address [default: $GRAMMAGE_SIM_ADDR or 127.0.0.1:10102]
    #[arg(long)]
    sim: Option<String>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: String,
    /// Record log (newline-delimited JSON)
    #[arg(long, default_value = "rolls.ndjson")]
    store: PathBuf,
    #[arg(long, default_value_t = 500)]
    poll_ms: u64,
}

#[derive(Debug, Args)]
struct PredictOnceArgs {
    #[arg(long)]
    model: PathBuf,
    /// Simulator address [default: $GRAMMAGE_SIM_ADDR or 127.0.0.1:10102]
    #[arg(long)]
    sim: Option<String>,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match cmd::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
