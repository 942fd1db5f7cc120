use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tinstitch_core::PipelineConfig;

#[derive(Parser, Debug)]
#[command(name = "tinstitch", version, about = "Memory-bounded tiled style transfer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Stylize a content image patch by patch and write a PNG.
    Stylize(StylizeArgs),
    /// Normalization statistics of an image at several thumbnail scales (CSV).
    StatsSweep(SweepArgs),
    /// Whole-image versus tiled output of the toy network.
    SeamCheck(SeamArgs),
    /// Estimated working set over a grid of content resolutions (CSV).
    MemReport(MemArgs),
    /// Write a built-in graph and seeded weights.
    InitNetwork(InitArgs),
    /// Write a synthetic test image.
    Synth(SynthArgs),
}

/// Tiling and execution flags shared by the pipeline commands.
#[derive(Args, Debug, Clone)]
pub struct PipelineArgs {
    /// Window edge K in pixels.
    #[arg(long, default_value_t = 1064)]
    pub patch_size: usize,
    /// Window step S in pixels.
    #[arg(long, default_value_t = 1000)]
    pub stride: usize,
    /// Thumbnail shorter side.
    #[arg(long = "thumb", default_value_t = 1024)]
    pub thumb_short_side: usize,
    /// Patches per forward pass.
    #[arg(long = "batch", default_value_t = 1)]
    pub batch_size: usize,
    /// Worker threads (overridden by TINSTITCH_THREADS).
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Style images are resized to this square edge.
    #[arg(long, default_value_t = 1024)]
    pub style_size: usize,
    /// Style weight in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f32,
}

impl PipelineArgs {
    /// Maps the flags onto a pipeline configuration. `threads` is the value
    /// of TINSTITCH_THREADS, if set.
    pub fn config(&self, allow_in: bool, threads: Option<&str>) -> anyhow::Result<PipelineConfig> {
        let workers = match threads {
            Some(t) => t.trim().parse().map_err(|_| anyhow::anyhow!("TINSTITCH_THREADS must be a positive integer, got {t:?}"))?,
            None => self.workers,
        };
        Ok(PipelineConfig {
            thumb_short_side: self.thumb_short_side,
            patch_size: self.patch_size,
            stride: self.stride,
            batch_size: self.batch_size,
            alpha: self.alpha,
            workers,
            style_size: self.style_size,
            allow_plain_norm: allow_in,
            keep_thumbnail: false,
        })
    }
}

#[derive(Args, Debug)]
pub struct StylizeArgs {
    #[arg(long)]
    pub content: PathBuf,
    /// Style image; ignored by graphs without AdaIN layers.
    #[arg(long)]
    pub style: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Graph JSON.
    #[arg(long)]
    pub graph: PathBuf,
    /// Weight container.
    #[arg(long)]
    pub weights: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Run graphs with plain per-patch IN / IW layers.
    #[arg(long)]
    pub allow_in: bool,
    /// Also write the memory report and timings as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Graph and weights, or a built-in network when both are omitted.
#[derive(Args, Debug)]
pub struct NetworkArgs {
    #[arg(long, requires = "weights")]
    pub graph: Option<PathBuf>,
    #[arg(long, requires = "graph")]
    pub weights: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Input PNG. Without it a synthetic image is generated.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Seed of the synthetic image.
    #[arg(long, default_value_t = 11)]
    pub seed: u64,
    /// Encoder graph and weights; defaults to the built-in reference encoder.
    #[command(flatten)]
    pub network: NetworkArgs,
    /// Channel divisor of the built-in encoder.
    #[arg(long, default_value_t = 8)]
    pub width_divisor: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [128, 256, 512, 1024, 2048])]
    pub scales: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = ["relu1_1".to_string(), "relu2_1".to_string(), "relu3_1".to_string(), "relu4_1".to_string()])]
    pub probes: Vec<String>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SeamArgs {
    /// Edge of the square random test image.
    #[arg(long, default_value_t = 512)]
    pub size: usize,
    #[arg(long, default_value_t = 96)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 64)]
    pub stride: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Swap the toy network's thumbnail-conditioned norm for plain IN.
    #[arg(long)]
    pub allow_in: bool,
    /// Reference-encoder layer for the Gram comparison.
    #[arg(long, default_value = "relu4_1")]
    pub probe: String,
    /// Write the tile plan as JSON.
    #[arg(long)]
    pub plan_json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MemArgs {
    /// Graph and weights; defaults to the toy network.
    #[command(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Square content edges.
    #[arg(long, value_delimiter = ',', default_values_t = [1000, 2000, 4000, 6000, 8000, 10000])]
    pub sizes: Vec<usize>,
    /// Also run the pipeline on each size and record the allocator peak.
    #[arg(long)]
    pub measure: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Builtin {
    /// Four convolutions around one TIN layer.
    Toy,
    /// Encoder, AdaIN, decoder.
    Reference,
    /// Encoder half of the reference network.
    Encoder,
}

#[derive(Args, Debug)]
pub struct InitArgs {
    #[arg(long, value_enum)]
    pub kind: Builtin,
    #[arg(long, default_value_t = 1)]
    pub width_divisor: usize,
    /// Weight seed; the toy network defaults to its fixed seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub height: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Finest noise wavelength in pixels.
    #[arg(long, default_value_t = 8)]
    pub finest: usize,
    #[arg(long)]
    pub out: PathBuf,
}
