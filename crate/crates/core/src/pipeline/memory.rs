//! Analytic working-set estimate.
//!
//! Each stage is charged two live activations (the executor's ping-pong
//! buffers, sized to the largest activation of the stage) plus its input.
//! Windows and thumbnails are charged at their configured size, as the
//! pipeline reserves them, even when the content is smaller.
//! Weights and the statistics bank are resident throughout. Content and
//! output pixel buffers are reported separately since both can be streamed.

use serde::Serialize;

use super::{thumbnail_dims, PipelineConfig};
use crate::error::Result;
use crate::network::{LayerKind, NetworkGraph, NormVariant};
use crate::tensor::Dims;

const F32: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MemoryReport {
    pub content_height: usize,
    pub content_width: usize,
    pub weights_bytes: usize,
    pub bank_bytes: usize,
    pub style_stage_bytes: usize,
    pub thumbnail_stage_bytes: usize,
    /// One worker, `batch_size` patches.
    pub patch_stage_bytes: usize,
    pub workers: usize,
    pub content_buffer_bytes: usize,
    pub output_buffer_bytes: usize,
    /// Working set of running the network on the whole image at once.
    pub whole_image_bytes: usize,
    /// Weights, bank, and the largest stage.
    pub total_bytes: usize,
}

fn peak_values(graph: &NetworkGraph, input: Dims, layers: usize) -> Result<usize> {
    let dims = graph.activation_dims(input)?;
    Ok(dims[..layers].iter().map(Dims::len).fold(input.len(), usize::max))
}

fn bank_values(graph: &NetworkGraph) -> usize {
    graph
        .layers
        .iter()
        .map(|l| match l.kind {
            LayerKind::Norm { variant: NormVariant::Tin, channels, .. } => 2 * channels,
            LayerKind::Norm { variant: NormVariant::Adain, channels, .. } => 4 * channels,
            LayerKind::Norm { variant: NormVariant::Tiw, channels, .. } => channels + channels * channels,
            _ => 0,
        })
        .sum()
}

pub fn estimate_memory(graph: &NetworkGraph, cfg: &PipelineConfig, content_h: usize, content_w: usize) -> Result<MemoryReport> {
    cfg.validate()?;
    let c = graph.input_channels;
    let n_layers = graph.layers.len();
    let content = Dims::new(1, c, content_h, content_w);

    let style_stage = match graph.norm_layers().filter(|(_, v)| *v == NormVariant::Adain).map(|(i, _)| i).last() {
        Some(last) => {
            let style = Dims::new(1, c, cfg.style_size, cfg.style_size);
            F32 * (style.len() + 2 * peak_values(graph, style, last + 1)?)
        }
        None => 0,
    };

    let (th, tw) = thumbnail_dims(content_h, content_w, cfg.thumb_short_side);
    let thumb = content.with_spatial(th, tw);
    let resized_input = if thumb == content { 0 } else { thumb.len() };
    let square = Dims::new(1, c, cfg.thumb_short_side, cfg.thumb_short_side);
    let thumb_peak = peak_values(graph, thumb, n_layers)?.max(peak_values(graph, square, n_layers)?);
    let mut thumbnail_stage = F32 * (resized_input + 2 * thumb_peak);
    if cfg.keep_thumbnail {
        let out = graph.activation_dims(thumb)?.last().copied().unwrap_or(thumb);
        thumbnail_stage += F32 * out.len();
    }

    let window = Dims::new(1, c, cfg.patch_size, cfg.patch_size);
    let patch_stage = cfg.batch_size * F32 * (window.len() + 2 * peak_values(graph, window, n_layers)?);

    let out_c = graph.output_channels();
    let weights = F32 * graph.parameter_count();
    let bank = F32 * bank_values(graph);
    let workers = cfg.workers;
    let total = weights + bank + style_stage.max(thumbnail_stage).max(workers * patch_stage);
    Ok(MemoryReport {
        content_height: content_h,
        content_width: content_w,
        weights_bytes: weights,
        bank_bytes: bank,
        style_stage_bytes: style_stage,
        thumbnail_stage_bytes: thumbnail_stage,
        patch_stage_bytes: patch_stage,
        workers,
        content_buffer_bytes: F32 * content.len(),
        output_buffer_bytes: F32 * out_c * content_h * content_w,
        whole_image_bytes: weights + F32 * 2 * peak_values(graph, content, n_layers)?,
        total_bytes: total,
    })
}

impl MemoryReport {
    pub const CSV_HEADER: &'static str = "height,width,weights,bank,style_stage,thumbnail_stage,patch_stage,workers,total,output_buffer,whole_image";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.content_height,
            self.content_width,
            self.weights_bytes,
            self.bank_bytes,
            self.style_stage_bytes,
            self.thumbnail_stage_bytes,
            self.patch_stage_bytes,
            self.workers,
            self.total_bytes,
            self.output_buffer_bytes,
            self.whole_image_bytes
        )
    }
}
