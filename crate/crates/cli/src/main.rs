//! `d2t`: batch pipelines for exemplar-guided data-to-text generation.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use d2t_core::numeric::Precision;

#[derive(Debug, Parser)]
#[command(name = "d2t", version, about = "Data-to-text generation with exemplar style imitation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic restaurant corpus.
    GenSynthetic(GenSyntheticArgs),
    /// Align box-score sentences with their tables into a corpus.
    PrepareNba(PrepareNbaArgs),
    /// Pair every query with an exemplar from the pool.
    Retrieve(RetrieveArgs),
    /// Train a model on a corpus.
    Train(TrainArgs),
    /// Beam-search a generation for every triple.
    Generate(GenerateArgs),
    /// Template baseline outputs for every triple.
    Slotfill(SlotfillArgs),
    /// Score generations against their triples.
    Evaluate(EvaluateArgs),
    /// Compare analytic gradients with finite differences on a tiny model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct GenSyntheticArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub pairs: usize,
    #[arg(long)]
    pub min_fields: Option<usize>,
    #[arg(long)]
    pub max_fields: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PrepareNbaArgs {
    /// Games file: one `{"id", "table", "sentences"}` object per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Filter rules file; the built-in starter rules when absent.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Where triples are resolved: queries from `--corpus`, exemplars from
/// `--pool` (the corpus itself when absent).
#[derive(Debug, Args)]
pub struct Sources {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub pool: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[command(flatten)]
    pub sources: Sources,
    #[arg(long, default_value_t = 5)]
    pub max_distance: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Overrides applied on top of `--config`.
#[derive(Debug, Default, Args)]
pub struct TrainOverrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_distance: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs_pretrain: Option<usize>,
    #[arg(long)]
    pub epochs_full: Option<usize>,
    #[arg(long)]
    pub precision: Option<Precision>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub sources: Sources,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: TrainOverrides,
    /// Continue from this checkpoint instead of a fresh initialization.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub sources: Sources,
    #[arg(long)]
    pub triples: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Supplies `beam_width`, `max_len` and `precision` defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub precision: Option<Precision>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SlotfillArgs {
    #[command(flatten)]
    pub sources: Sources,
    #[arg(long)]
    pub triples: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub sources: Sources,
    #[arg(long)]
    pub triples: PathBuf,
    /// Generations: one `{"id", "text"}` object per line.
    #[arg(long)]
    pub gen: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a score-by-distance table here.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Pairs to draw triples from; a small synthetic corpus when absent.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub instances: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::GenSynthetic(a) => commands::gen_synthetic(a, &argv),
        Command::PrepareNba(a) => commands::prepare_nba(a, &argv),
        Command::Retrieve(a) => commands::retrieve(a, &argv),
        Command::Train(a) => commands::train(a, &argv),
        Command::Generate(a) => commands::generate(a, &argv),
        Command::Slotfill(a) => commands::slotfill(a, &argv),
        Command::Evaluate(a) => commands::evaluate(a, &argv),
        Command::Gradcheck(a) => commands::gradcheck(a, &argv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
