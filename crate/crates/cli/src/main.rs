//! `depchain`: generate corpora, extract chains, train, evaluate,
//! cross-validate, explain and gradient-check from one binary.
//!
//! Exit codes: 0 success, 1 runtime or data error, 2 usage error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use depchain::chain::ReprKind;
use depchain::harness::TreeReadout;
use depchain::models::{Activation, ModelKind};

#[derive(Debug, Parser)]
#[command(name = "depchain", version, about = "Dependency-chain event temporal status classification")]
struct Cli {
    /// Default location of corpus.conllu and events.jsonl.
    #[arg(long, global = true, env = "DEPCHAIN_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic labeled corpus.
    Gen(GenArgs),
    /// Dump the token selection of every mention as JSON lines.
    Extract(ExtractArgs),
    /// Train a classifier and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on labeled mentions.
    Eval(EvalArgs),
    /// k-fold cross-validation, optionally over several representations.
    Cv(CvArgs),
    /// Write per-mention saliency heatmaps.
    Saliency(SaliencyArgs),
    /// Compare analytic and finite-difference gradients on a random model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Output directory; defaults to the data directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// PAST,ONGOING,FUTURE proportions summing to 1.
    #[arg(long, value_name = "P,Q,R", value_parser = parse_weights, default_value = "0.67,0.21,0.12")]
    weights: [f64; 3],
    /// Filler tokens between cue verb and target.
    #[arg(long, default_value_t = 9)]
    distractor_len: usize,
}

/// Corpus and events files, defaulting to the data directory.
#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    conllu: Option<PathBuf>,
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReprArg {
    Chain,
    Window,
    Tree,
}

impl From<ReprArg> for ReprKind {
    fn from(r: ReprArg) -> Self {
        match r {
            ReprArg::Chain => ReprKind::Chain,
            ReprArg::Window => ReprKind::Window,
            ReprArg::Tree => ReprKind::Tree,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Lstm,
    Cnn,
    Treelstm,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Lstm => ModelKind::Lstm,
            ModelArg::Cnn => ModelKind::Cnn,
            ModelArg::Treelstm => ModelKind::TreeLstm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ActivationArg {
    Relu,
    Tanh,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::Tanh => Activation::Tanh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReadoutArg {
    Root,
    Target,
}

impl From<ReadoutArg> for TreeReadout {
    fn from(r: ReadoutArg) -> Self {
        match r {
            ReadoutArg::Root => TreeReadout::Root,
            ReadoutArg::Target => TreeReadout::Target,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HeatmapFormat {
    Csv,
    Html,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    mode: ReprArg,
    #[arg(long, default_value_t = 7)]
    half_width: usize,
    /// JSON-lines output file.
    #[arg(long)]
    out: PathBuf,
}

/// Training settings. Unset flags fall back to `--config`, then to the defaults.
#[derive(Debug, Args)]
struct TrainFlags {
    /// JSON training config to start from.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Hidden units (LSTM, tree-LSTM) or filters (CNN).
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    half_width: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Word vectors in text format; random vectors are used otherwise.
    #[arg(long, conflicts_with = "emb_dim")]
    embeddings: Option<PathBuf>,
    /// Dimension of random embeddings.
    #[arg(long)]
    emb_dim: Option<usize>,
    #[arg(long, value_enum)]
    activation: Option<ActivationArg>,
    /// Tree-LSTM node read by the classifier.
    #[arg(long, value_enum)]
    readout: Option<ReadoutArg>,
    #[arg(long)]
    finetune_embeddings: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    flags: TrainFlags,
    #[arg(long = "repr", value_enum)]
    repr: Option<ReprArg>,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Checkpoint to evaluate.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// JSON report path; defaults to `<model>.eval.json`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    flags: TrainFlags,
    /// One or more representations; several produce a comparison table.
    #[arg(long = "repr", value_enum, value_delimiter = ',')]
    repr: Vec<ReprArg>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Folds trained in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Directory for the report, manifest and fold checkpoints.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SaliencyArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "html")]
    format: HeatmapFormat,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
}

fn parse_weights(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [p, q, r] = parts.as_slice() else {
        return Err(format!("expected three comma-separated weights, got {}", parts.len()));
    };
    let mut out = [0.0f64; 3];
    for (slot, text) in out.iter_mut().zip([p, q, r]) {
        *slot = text.parse().map_err(|_| format!("{text:?} is not a number"))?;
        if !slot.is_finite() || *slot < 0.0 {
            return Err(format!("weight {text} must be finite and nonnegative"));
        }
    }
    let sum: f64 = out.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(format!("weights must sum to 1, got {sum}"));
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(&cli.data_dir, a),
        Command::Extract(a) => commands::extract(&cli.data_dir, a),
        Command::Train(a) => commands::train(&cli.data_dir, a),
        Command::Eval(a) => commands::eval(&cli.data_dir, a),
        Command::Cv(a) => commands::cv(&cli.data_dir, a),
        Command::Saliency(a) => commands::saliency(&cli.data_dir, a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if e.is::<commands::UsageError>() { 2 } else { 1 };
            ExitCode::from(code)
        }
    }
}
