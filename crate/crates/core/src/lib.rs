//! Memory-bounded tiled style transfer.
//!
//! Large images are stylized patch by patch. A downscaled thumbnail of the
//! whole image is run through the network first to capture normalization
//! statistics at every norm layer; each overlapping patch is then run with
//! those frozen statistics, so all patches share one normalization map and
//! reassemble without style seams. The working set depends on the patch size
//! and the thumbnail size, not on the input resolution.
//!
//! Modules, bottom up:
//!
//! * [`tensor`]: NCHW `f32` tensors and the dense kernels.
//! * [`normstats`]: IN / TIN, IW / TIW, AdaIN and the statistics bank.
//! * [`network`]: graph description, weight container, executor.
//! * [`tiler`]: sliding-window plans, patch extraction, assembly.
//! * [`pipeline`]: thumbnail capture, streamed patch stylization, memory
//!   estimation, statistics sweeps.
//! * [`metrics`]: stroke perceptual loss and patch style consistency.

pub mod alloc;
mod error;
pub mod image_io;
pub mod metrics;
pub mod network;
pub mod normstats;
pub mod pipeline;
pub mod synth;
pub mod tensor;
pub mod tiler;

pub use error::{Error, Result};
pub use network::{Network, NetworkGraph, WeightStore};
pub use normstats::StatsBank;
pub use pipeline::{PipelineConfig, StylizeReport};
pub use tensor::{Dims, Tensor};
pub use tiler::{Rect, TilePlan};
