//! `signret`: train sign-retrieval models, encode and decode images, and
//! evaluate recovery.

mod commands;
mod config;
mod meta;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "signret", version, about = "Learned DCT sign retrieval codec")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model on seeded random crops of a PGM directory.
    Train(TrainArgs),
    /// Report sign recovery of a model on images.
    Retrieve(RetrieveArgs),
    /// Compress a PGM image into a container.
    Encode(EncodeArgs),
    /// Reconstruct a PGM image from a container.
    Decode(DecodeArgs),
    /// Per-QF table of recovery, bits per sign and timing.
    Eval(EvalArgs),
    /// Per-block recovery heat maps over a set of equally sized images.
    Heatmap(HeatmapArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Worker threads for batch gradients and per-image evaluation.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: u16,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantArg {
    Subband,
    Naive,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 64x64 crops, batch 8, 200 epochs, depth 2.
    Desk,
    /// 512x512 crops, batch 256, 15000 epochs, depth 8. Far beyond desk hardware.
    Full,
}

fn qf_parser() -> clap::builder::RangedI64ValueParser<u32> {
    clap::value_parser!(u32).range(1..=100)
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory of PGM images.
    #[arg(long)]
    pub images: PathBuf,
    /// Output weights file.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss log (`epoch,loss`); defaults to `<out>.loss.csv`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 75, value_parser = qf_parser())]
    pub qf: u32,
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    pub preset: Preset,
    #[arg(long, value_enum, default_value_t = VariantArg::Subband)]
    pub variant: VariantArg,
    /// Number of convolution layers.
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..=8))]
    pub depth: Option<u32>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub epochs: Option<u32>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub batch_size: Option<u32>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Number of crops drawn from the images.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
    pub crops: u32,
    /// Crop side in pixels, a multiple of 8.
    #[arg(long)]
    pub crop_size: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct RetrieveArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub weights: PathBuf,
    /// PGM image; may be repeated.
    #[arg(long, required_unless_present = "images")]
    pub image: Vec<PathBuf>,
    /// Directory of PGM images.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Quantization quality; defaults to the QF the model was trained at.
    #[arg(long, value_parser = qf_parser())]
    pub qf: Option<u32>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = qf_parser())]
    pub qf: Option<u32>,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub images: PathBuf,
    /// Comma-separated QFs; defaults to the training QF.
    #[arg(long, value_delimiter = ',', value_parser = qf_parser())]
    pub qf: Vec<u32>,
    /// Output table; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write per-QF heat maps into this directory.
    #[arg(long)]
    pub heatmap_dir: Option<PathBuf>,
    /// Timed retrievals per image after one warm-up; 0 leaves the column empty.
    #[arg(long, default_value_t = 5)]
    pub timing_runs: u32,
}

#[derive(Args, Debug)]
pub struct HeatmapArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long, value_parser = qf_parser())]
    pub qf: Option<u32>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

impl Command {
    fn threads(&self) -> u16 {
        match self {
            Command::Train(a) => a.common.threads,
            Command::Retrieve(a) => a.common.threads,
            Command::Encode(a) => a.common.threads,
            Command::Decode(a) => a.common.threads,
            Command::Eval(a) => a.common.threads,
            Command::Heatmap(a) => a.common.threads,
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn run(argv: Vec<String>) -> anyhow::Result<()> {
    let argv = config::expand(argv)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            e.print()?;
            return Ok(());
        }
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or_default();
            anyhow::bail!("{}", first.trim_start_matches("error: "));
        }
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(usize::from(cli.command.threads()))
        .build_global()?;
    match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Retrieve(a) => commands::retrieve(&a),
        Command::Encode(a) => commands::encode(&a),
        Command::Decode(a) => commands::decode(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Heatmap(a) => commands::heatmap(&a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
