use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use probekit::heads::Decoder;
use probekit::ProbeKind;

#[derive(Parser, Debug)]
#[command(name = "probekit", version, args_override_self = true, about = "Attention-shaped structural probes and V-information estimates")]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train one probe on one layer and write a checkpoint.
    Train(TrainArgs),
    /// Turn a directory of checkpoints into V-information reports.
    Info(InfoArgs),
    /// Score every attention head as a parser.
    Heads(HeadsArgs),
    /// Dump enumerated trees and partition values for a random weight matrix.
    Oracle(OracleArgs),
    /// Per-layer series and SVG figures from reports.
    Plotdata(PlotArgs),
    /// Write synthetic treebanks with representation and attention files.
    Synth(SynthArgs),
}

/// Flags shared by commands that split a treebank.
#[derive(Args, Debug, Clone)]
pub struct SplitArgs {
    /// Fraction of sentences held out for dev.
    #[arg(long, default_value_t = 0.1)]
    pub dev_frac: f64,
    /// Fraction of sentences held out for test.
    #[arg(long, default_value_t = 0.1)]
    pub test_frac: f64,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// attentional, structural, biaffine or positional-<family>.
    #[arg(long, value_parser = parse_kind)]
    pub probe: ProbeKind,
    #[arg(long, default_value_t = 0)]
    pub layer: usize,
    #[arg(long)]
    pub reprs: PathBuf,
    #[arg(long)]
    pub treebank: PathBuf,
    /// Flat `key = value` config; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint path; the log goes next to it as `<stem>.log.jsonl`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub max_batches: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Key/query width of attentional and structural probes.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Random-search trials for a contextual biaffine probe; 0 uses the
    /// config's MLP settings.
    #[arg(long, default_value_t = 0)]
    pub trials: usize,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Args, Debug)]
pub struct InfoArgs {
    /// Directory holding `.prbp` checkpoints from `train`.
    #[arg(long)]
    pub model_dir: PathBuf,
    #[arg(long)]
    pub treebank: PathBuf,
    #[arg(long)]
    pub reprs: PathBuf,
    /// Report CSV; a text table goes next to it as `<stem>.table.txt`.
    #[arg(long)]
    pub out: PathBuf,
    /// Label for the table's Model column.
    #[arg(long, default_value = "model")]
    pub model: String,
    /// Mutual information estimate in bits, overriding the biaffine skyline.
    #[arg(long)]
    pub mi: Option<f64>,
}

#[derive(Args, Debug)]
pub struct HeadsArgs {
    #[arg(long)]
    pub attn: PathBuf,
    #[arg(long)]
    pub treebank: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_decoder, default_value = "map")]
    pub decoder: Decoder,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Sentence length, at most 7.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Report CSV from `info`.
    #[arg(long)]
    pub report: PathBuf,
    /// Head scores CSV from `heads`.
    #[arg(long)]
    pub heads: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthKind {
    /// Treebank with trained/untrained REPR files and an ATTW file.
    Export,
    /// Trees planted by a hidden attentional probe over Gaussian vectors.
    Planted,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "export")]
    pub kind: SynthKind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub sentences: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_kind(s: &str) -> Result<ProbeKind, String> {
    s.parse().map_err(|e: probekit::Error| e.to_string())
}

fn parse_decoder(s: &str) -> Result<Decoder, String> {
    s.parse().map_err(|e: probekit::Error| e.to_string())
}
