use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "s3pl",
    version,
    about = "Spatially structured peak picking for mass spectrometry imaging",
    long_about = "Trains a self-supervised attention autoencoder on spectral patches and \
                  picks the m/z bins it attends to most. Every command writes a JSON run \
                  manifest next to its outputs; `s3pl replay` re-runs one."
)]
pub struct Cli {
    /// Worker threads for training, picking and evaluation [default: all cores].
    /// Results do not depend on it.
    #[arg(long, global = true, env = "S3PL_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with a planted ground truth.
    Synth(SynthArgs),
    /// Train the attention autoencoder and write a checkpoint.
    Train(TrainArgs),
    /// Pick peaks with a trained checkpoint.
    Pick(PickArgs),
    /// Score peak lists against a segmentation mask.
    Eval(EvalArgs),
    /// Export ion images as PNG or CSV.
    Ionimage(IonImageArgs),
    /// Pick peaks with the signal-to-noise baseline on the mean spectrum.
    Baseline(BaselineArgs),
    /// Re-run the command recorded in a run manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Existing directory receiving dataset.s3pl, mask.png, mask.csv and truth.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    #[arg(long, default_value_t = 32)]
    pub height: usize,
    /// Number of m/z bins.
    #[arg(long, default_value_t = 256)]
    pub bins: usize,
    #[arg(long, default_value_t = 12)]
    pub structured: usize,
    #[arg(long, default_value_t = 12)]
    pub unstructured: usize,
    /// Amplitude of the uniform noise added to every intensity.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// key=value file with p, d1, d2, z, n, epochs, lr, batch, seed.
    /// Flags override the file; the file overrides the defaults, which are
    /// the published settings p=3, d1=51, d2=1, z=256, epochs=10, lr=0.01,
    /// batch=16, plus seed=0. Kernel depths above the bin count are clipped.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for initialization and shuffling [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset: an .imzML file (with its .ibd) or a native dump.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Training epochs [default: 10, the published setting].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Existing directory receiving model.ckpt and losses.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PickArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Checkpoint written by `s3pl train`.
    #[arg(long, alias = "checkpoint")]
    pub model: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Highest-attention bins each patch votes for [default: 256, the
    /// published setting; at most the number of bins].
    #[arg(long)]
    pub z: Option<usize>,
    /// Number of peaks to report (required here or in the config file).
    #[arg(long)]
    pub n: Option<usize>,
    /// Existing directory receiving peaks.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Raw dataset; ion images are correlated without normalization.
    #[arg(long)]
    pub input: PathBuf,
    /// Segmentation mask, .png or .csv.
    #[arg(long)]
    pub mask: PathBuf,
    /// Peak CSV to score, as `path` or `name=path`; repeat for several pickers.
    #[arg(long = "peaks", required = true)]
    pub peaks: Vec<String>,
    /// Also print the positive count at each threshold.
    #[arg(long)]
    pub budget: bool,
    /// Existing directory receiving report.json, comparison.csv and pcc_table.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImageFormat {
    Png,
    Csv,
}

#[derive(Debug, Args)]
pub struct IonImageArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated bin indices.
    #[arg(
        long,
        value_delimiter = ',',
        conflicts_with = "peaks",
        required_unless_present = "peaks"
    )]
    pub bins: Vec<usize>,
    /// Peak CSV whose bins to export.
    #[arg(long)]
    pub peaks: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ImageFormat::Png)]
    pub format: ImageFormat,
    /// Existing directory receiving ion_<bin>.png or ion_<bin>.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Maximum number of peaks; fewer are returned if fewer qualify.
    #[arg(long)]
    pub n: usize,
    /// Bins on each side used for the noise estimate.
    #[arg(long, default_value_t = 10)]
    pub half_window: usize,
    /// Minimum ratio of intensity to the local median absolute deviation.
    #[arg(long, default_value_t = 3.0)]
    pub snr: f64,
    /// Existing directory receiving peaks.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    /// Write outputs here instead of the recorded directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Train(_) => "train",
            Command::Pick(_) => "pick",
            Command::Eval(_) => "eval",
            Command::Ionimage(_) => "ionimage",
            Command::Baseline(_) => "baseline",
            Command::Replay(_) => "replay",
        }
    }
}
