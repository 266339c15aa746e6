use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use mcrec_core::catalog::ItemFormat;
use mcrec_core::recommender::ProviderChoice;
use mcrec_core::Strategy;

/// Multi-carousel book recommendation: data preparation, scoring, carousel
/// generation and offline evaluation.
///
/// Settings resolve as: command-line flags, then `MCREC_*` environment
/// variables, then the config file, then built-in defaults.
#[derive(Debug, Parser)]
#[command(name = "mcrec", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, env = "MCREC_CONFIG")]
    pub config: Option<PathBuf>,

    /// Random seed; overrides the config file.
    #[arg(long, global = true, env = "MCREC_SEED")]
    pub seed: Option<u64>,

    /// Worker threads for per-user work (default: all cores).
    #[arg(long, global = true, env = "MCREC_WORKERS")]
    pub workers: Option<usize>,

    /// Directory for outputs.
    #[arg(long, global = true, env = "MCREC_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and filter raw item/transaction files into a dataset archive.
    Ingest(IngestArgs),
    /// Write a ranked prediction list for every user of a dataset.
    Score(ScoreArgs),
    /// Select and fill carousels for every user.
    Carousels(CarouselArgs),
    /// Run a full offline experiment and write the report.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic clustered library dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub items: PathBuf,
    #[arg(long)]
    pub transactions: PathBuf,
    /// Item file format; guessed from the extension when omitted.
    #[arg(long, value_parser = parse_format)]
    pub item_format: Option<ItemFormat>,
    /// Drop users borrowing fewer loans per active year than this.
    #[arg(long)]
    pub min_annual_loans: Option<f64>,
    /// Drop users borrowing more loans per active year than this.
    #[arg(long)]
    pub max_annual_loans: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Dataset archive directory written by `ingest`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// cooccurrence, random or import:<path>.
    #[arg(long, value_parser = parse_provider)]
    pub provider: Option<ProviderChoice>,
    /// Predictions per user.
    #[arg(long)]
    pub n: Option<usize>,
    /// Output file (default: <out-dir>/predictions.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CarouselArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Predictions file (`user_id,item_id,score`). Users without predictions
    /// get cold-start carousels.
    #[arg(long)]
    pub predictions: PathBuf,
    /// original, diversity, serendipity, novelty or combined.
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Strategy,
    #[arg(long)]
    pub carousel_size: Option<usize>,
    #[arg(long)]
    pub pool_size: Option<usize>,
    #[arg(long)]
    pub evaluation_date: Option<NaiveDate>,
    #[arg(long)]
    pub novelty_cutoff: Option<NaiveDate>,
    /// Restrict to these users (comma-separated); unknown users are cold-start.
    #[arg(long, value_delimiter = ',')]
    pub users: Vec<String>,
    /// Output file (default: <out-dir>/carousels.jsonl).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_parser = parse_provider)]
    pub provider: Option<ProviderChoice>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    pub users: usize,
    #[arg(long, default_value_t = 5000)]
    pub items: usize,
    #[arg(long, default_value_t = 2)]
    pub clusters: usize,
    /// Share of each user's loans inside their cluster.
    #[arg(long, default_value_t = 0.9)]
    pub purity: f64,
    /// Share of items added in the final year.
    #[arg(long, default_value_t = 0.2)]
    pub recent_fraction: f64,
    #[arg(long)]
    pub snapshot_date: Option<NaiveDate>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: mcrec_core::Error| e.to_string())
}

fn parse_provider(s: &str) -> Result<ProviderChoice, String> {
    s.parse().map_err(|e: mcrec_core::Error| e.to_string())
}

fn parse_format(s: &str) -> Result<ItemFormat, String> {
    s.parse().map_err(|e: mcrec_core::Error| e.to_string())
}
