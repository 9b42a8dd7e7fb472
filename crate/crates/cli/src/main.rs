//! `mltm`: train, apply and evaluate multilingual topic models.
//!
//! Exit codes: 0 success, 1 internal error, 2 configuration error, 3 data
//! error.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mltm_core::models::ModelKind;
use mltm_core::{Error, ErrorClass};

#[derive(Parser, Debug)]
#[command(name = "mltm", version, about = "Multilingual topic models with document and vocabulary links")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Caps the worker threads used by parallel stages.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true, default_value = "info")]
    pub log_level: log::LevelFilter,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model from the configured corpora.
    Train(TrainArgs),
    /// Infer topic proportions for held-out documents.
    Infer(InferArgs),
    /// Evaluate a trained model.
    Eval(EvalArgs),
    /// Build and write dictionary transfer matrices.
    TransferBuild,
    /// Generate a synthetic bilingual world.
    Synth(SynthArgs),
    /// Summarize a model, corpus, dictionary or transfer file.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_kind)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub topics: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub dict_fraction: Option<f64>,
    /// Focal threshold; scope stays as configured (doc-wise by default).
    #[arg(long)]
    pub focal_threshold: Option<f64>,
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// JSON-lines documents, all in one of the model's languages.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub language: String,
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Evaluation {
    Cnpmi,
    Classify,
    Lis,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    pub which: Vec<Evaluation>,
    /// Parallel reference pairs for CNPMI; defaults to the configured path.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Labelled test documents; may be repeated, one per direction.
    #[arg(long)]
    pub test: Vec<PathBuf>,
    /// Labelled training documents of a model language; defaults to the
    /// configured corpora.
    #[arg(long)]
    pub train_corpus: Vec<PathBuf>,
    /// Train the classifier on the test documents' own language instead of
    /// the other one.
    #[arg(long)]
    pub same_language: bool,
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    #[arg(long)]
    pub top_words: Option<usize>,
    #[arg(long)]
    pub tune_thresholds: bool,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    pub topics: usize,
    #[arg(long, default_value_t = 500)]
    pub vocab: usize,
    #[arg(long, default_value_t = 200)]
    pub docs: usize,
    #[arg(long, default_value_t = 50)]
    pub doc_len: usize,
    #[arg(long, default_value_t = 0.3)]
    pub coverage: f64,
    #[arg(long, default_value_t = 20.0)]
    pub sharpness: f64,
    #[arg(long, default_value_t = 0.2)]
    pub concentration: f64,
    #[arg(long, default_value_t = 0.0)]
    pub links: f64,
    #[arg(long, default_value_t = 100)]
    pub heldout: usize,
    #[arg(long, default_value_t = 1000)]
    pub reference_pairs: usize,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    pub file: PathBuf,
    /// Top words listed per topic for model files.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Internal => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not set thread count: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
