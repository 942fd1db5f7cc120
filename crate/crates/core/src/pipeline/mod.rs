//! Thumbnail capture, streamed patch stylization, and assembly.
//!
//! [`stylize`] runs in three stages:
//!
//! 1. If the graph has AdaIN layers, the style image (resized to
//!    `style_size`²) is encoded and its statistics recorded as targets.
//! 2. A thumbnail of the content (shorter side `thumb_short_side`, never
//!    upscaled) runs through the whole network in capture mode; every
//!    thumbnail-conditioned norm layer records its statistics. The bank is
//!    then frozen.
//! 3. Windows from the tile plan are cropped, stylized in apply mode, and
//!    their owned regions handed to a sink. Workers pull batches of windows
//!    from a shared counter. Each has a workspace sized from the
//!    configuration, so the working set does not grow with the content.

mod memory;
mod sink;
mod sweep;

pub use memory::{estimate_memory, MemoryReport};
pub use sink::{OwnershipSink, PngBandSink, TensorSink};
pub use sweep::{convergence, stats_sweep, Convergence, SweepResult, SweepRow};

use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Error, Result};
use crate::image_io::load_png;
use crate::network::{ExecOptions, Network, NormVariant, StatsMode, Workspace};
use crate::normstats::{StatsBank, EPS};
use crate::tensor::{resize_bilinear, resize_bilinear_into, Dims, Tensor, TensorRef};
use crate::tiler::{plan_tiles, Rect, TilePlan};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub thumb_short_side: usize,
    /// Window edge K.
    pub patch_size: usize,
    /// Window step S.
    pub stride: usize,
    pub batch_size: usize,
    /// Style weight at AdaIN layers, in `[0, 1]`.
    pub alpha: f32,
    pub workers: usize,
    /// Style images are resized to `style_size × style_size`.
    pub style_size: usize,
    /// Run graphs with plain IN / IW layers anyway (each patch then uses its
    /// own statistics).
    pub allow_plain_norm: bool,
    /// Return the stylized thumbnail in the report.
    pub keep_thumbnail: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            thumb_short_side: 1024,
            patch_size: 1064,
            stride: 1000,
            batch_size: 1,
            alpha: 1.0,
            workers: 1,
            style_size: 1024,
            allow_plain_norm: false,
            keep_thumbnail: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 || self.patch_size <= self.stride {
            return Err(config_err!(
                "patch size {} must exceed stride {} >= 1",
                self.patch_size,
                self.stride
            ));
        }
        if self.thumb_short_side == 0 || self.style_size == 0 {
            return Err(config_err!("thumbnail and style sizes must be positive"));
        }
        if self.batch_size == 0 || self.workers == 0 {
            return Err(config_err!("batch size and worker count must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(config_err!("alpha {} outside [0, 1]", self.alpha));
        }
        Ok(())
    }
}

/// Thumbnail extent for an `h × w` image: shorter side scaled to `short`,
/// aspect preserved, never upscaled.
pub fn thumbnail_dims(h: usize, w: usize, short: usize) -> (usize, usize) {
    let s = h.min(w);
    if s <= short {
        return (h, w);
    }
    let scale = short as f64 / s as f64;
    let fit = |v: usize| if v == s { short } else { ((v as f64 * scale).round() as usize).max(1) };
    (fit(h), fit(w))
}

#[derive(Debug)]
pub struct StylizeReport {
    pub content: Dims,
    pub thumbnail: Dims,
    pub plan: TilePlan,
    pub workers: usize,
    pub bank_bytes: usize,
    pub workspace_bytes: usize,
    pub style_time: Duration,
    pub thumbnail_time: Duration,
    pub patch_time: Duration,
    /// Stylized thumbnail, when `keep_thumbnail` is set.
    pub stylized_thumbnail: Option<Tensor>,
}

fn last_adain(net: &Network) -> Option<usize> {
    net.graph().norm_layers().filter(|(_, v)| *v == NormVariant::Adain).map(|(i, _)| i).last()
}

/// Activation values each workspace buffer reserves.
///
/// Sized from the configuration: a full `batch × K × K` window, a square
/// thumbnail of the configured short side (or the actual thumbnail if it
/// is larger), and the style image. Content smaller than a window is
/// charged as if it filled one, so the reservation does not depend on the
/// content resolution.
pub fn workspace_capacity(net: &Network, cfg: &PipelineConfig, thumb: Dims) -> Result<usize> {
    let c = net.graph().input_channels;
    let full = 0..net.len();
    let window = Dims::new(cfg.batch_size, c, cfg.patch_size, cfg.patch_size);
    let square = Dims::new(1, c, cfg.thumb_short_side, cfg.thumb_short_side);
    let mut cap = net
        .peak_activation(window, full.clone())?
        .max(net.peak_activation(square, full.clone())?)
        .max(net.peak_activation(thumb, full)?);
    if let Some(last) = last_adain(net) {
        let style = Dims::new(1, c, cfg.style_size, cfg.style_size);
        cap = cap.max(net.peak_activation(style, 0..last + 1)?);
    }
    Ok(cap)
}

/// Stylizes `content` (1×C×H×W) into `sink`.
///
/// `style` is required when the graph has AdaIN layers and ignored
/// otherwise.
pub fn stylize(
    net: &Network,
    content: &Tensor,
    style: Option<&Tensor>,
    cfg: &PipelineConfig,
    sink: &mut dyn OwnershipSink,
) -> Result<StylizeReport> {
    cfg.validate()?;
    if !cfg.allow_plain_norm {
        net.graph().check_patch_safe()?;
    }
    let cd = content.dims();
    if cd.n != 1 {
        return Err(shape_err!("content must be a single image, got {cd}"));
    }
    let plan = plan_tiles(cd.w, cd.h, cfg.patch_size, cfg.stride)?;
    let batch = cfg.batch_size.min(plan.len());
    let (th, tw) = thumbnail_dims(cd.h, cd.w, cfg.thumb_short_side);
    let thumb_dims = cd.with_spatial(th, tw);
    let full = 0..net.len();
    let adain = last_adain(net);
    let style_dims = Dims::new(1, net.graph().input_channels, cfg.style_size, cfg.style_size);

    let mut ws = Workspace::with_capacity(workspace_capacity(net, cfg, thumb_dims)?);
    let capacity = ws.capacity();
    let patch_len = cfg.batch_size * cd.c * cfg.patch_size * cfg.patch_size;
    let opts = ExecOptions { alpha: cfg.alpha, eps: EPS };
    let mut bank = StatsBank::new();

    let t0 = Instant::now();
    if let Some(last) = adain {
        let style = style.ok_or_else(|| config_err!("graph has AdaIN layers but no style image was given"))?;
        let sd = style.dims();
        if sd.n != 1 || sd.c != style_dims.c {
            return Err(shape_err!("style must be 1x{}xHxW, got {sd}", style_dims.c));
        }
        let resized;
        let style_view = if sd == style_dims {
            style.view()
        } else {
            resized = resize_bilinear(style, cfg.style_size, cfg.style_size)?;
            resized.view()
        };
        net.run(style_view, StatsMode::Style(&mut bank), opts, &mut ws, 0..last + 1, &mut |_, _| {})?;
    }
    let style_time = t0.elapsed();

    let t1 = Instant::now();
    let stylized_thumbnail = {
        let resized;
        let thumb_view = if thumb_dims == cd {
            content.view()
        } else {
            let mut t = Tensor::with_capacity(thumb_dims.len());
            resize_bilinear_into(content.view(), th, tw, &mut t)?;
            resized = t;
            resized.view()
        };
        let out = net.run(thumb_view, StatsMode::Capture(&mut bank), opts, &mut ws, full.clone(), &mut |_, _| {})?;
        cfg.keep_thumbnail.then(|| out.to_tensor())
    };
    bank.freeze();
    let thumbnail_time = t1.elapsed();
    log::info!(
        "thumbnail {}x{} captured {} norm layers in {:.2?}",
        tw,
        th,
        bank.len(),
        thumbnail_time
    );

    let t2 = Instant::now();
    sink.begin(&plan, net.graph().output_channels())?;
    let batches = plan.len().div_ceil(batch);
    let workers = cfg.workers.min(batches);
    let ctx = PatchContext { net, content: content.view(), plan: &plan, bank: &bank, opts, batch };
    if workers == 1 {
        let mut patch = Tensor::with_capacity(patch_len);
        for b in 0..batches {
            ctx.run_batch(b, &mut ws, &mut patch, &mut |i, t| sink.put(&plan, i, t))?;
        }
    } else {
        run_parallel(&ctx, workers, batches, ws, patch_len, sink)?;
    }
    sink.finish()?;
    let patch_time = t2.elapsed();
    log::info!("{} patches on {} workers in {:.2?}", plan.len(), workers, patch_time);

    Ok(StylizeReport {
        content: cd,
        thumbnail: thumb_dims,
        workers,
        bank_bytes: bank.size_bytes(),
        workspace_bytes: 4 * 2 * capacity * workers,
        plan,
        style_time,
        thumbnail_time,
        patch_time,
        stylized_thumbnail,
    })
}

struct PatchContext<'a> {
    net: &'a Network,
    content: TensorRef<'a>,
    plan: &'a TilePlan,
    bank: &'a StatsBank,
    opts: ExecOptions,
    batch: usize,
}

impl PatchContext<'_> {
    /// Stylizes batch `b` and emits each window's output.
    fn run_batch(
        &self,
        b: usize,
        ws: &mut Workspace,
        patch: &mut Tensor,
        emit: &mut dyn FnMut(usize, TensorRef<'_>) -> Result<()>,
    ) -> Result<()> {
        let first = b * self.batch;
        let last = (first + self.batch).min(self.plan.len());
        extract_batch(self.content, &self.plan.windows[first..last], patch);
        let out =
            self.net.run(patch.view(), StatsMode::Apply(self.bank), self.opts, ws, 0..self.net.len(), &mut |_, _| {})?;
        let od = out.dims();
        let win = self.plan.windows[first];
        if od.h != win.h || od.w != win.w {
            return Err(shape_err!(
                "network maps a {}x{} window to {}x{}; tiling needs size-preserving graphs",
                win.w,
                win.h,
                od.w,
                od.h
            ));
        }
        let item = Dims { n: 1, ..od };
        for (j, i) in (first..last).enumerate() {
            let view = TensorRef::new(item, &out.data()[j * item.len()..(j + 1) * item.len()])?;
            emit(i, view)?;
        }
        Ok(())
    }
}

fn run_parallel(
    ctx: &PatchContext<'_>,
    workers: usize,
    batches: usize,
    first_ws: Workspace,
    patch_len: usize,
    sink: &mut dyn OwnershipSink,
) -> Result<()> {
    let capacity = first_ws.capacity();
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let sink = Mutex::new(sink);
    let mut first_ws = Some(first_ws);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let mut ws = first_ws.take().unwrap_or_else(|| Workspace::with_capacity(capacity));
            let (next, stop, failure, sink) = (&next, &stop, &failure, &sink);
            scope.spawn(move || {
                let mut patch = Tensor::with_capacity(patch_len);
                let mut emit = |i: usize, t: TensorRef<'_>| sink.lock().expect("sink lock").put(ctx.plan, i, t);
                while !stop.load(Ordering::Relaxed) {
                    let b = next.fetch_add(1, Ordering::Relaxed);
                    if b >= batches {
                        break;
                    }
                    if let Err(e) = ctx.run_batch(b, &mut ws, &mut patch, &mut emit) {
                        stop.store(true, Ordering::Relaxed);
                        failure.lock().expect("failure lock").get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });
    match failure.into_inner().expect("failure lock") {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Crops `windows` (all the same size) of `src` into one batched tensor.
fn extract_batch(src: TensorRef<'_>, windows: &[Rect], out: &mut Tensor) {
    let d = src.dims();
    let (w, h) = (windows[0].w, windows[0].h);
    out.reset(Dims::new(windows.len(), d.c, h, w));
    let data = out.data_mut();
    let mut dst = 0;
    for r in windows {
        for c in 0..d.c {
            let plane = src.plane(0, c);
            for y in r.y..r.y + h {
                let s = y * d.w + r.x;
                data[dst..dst + w].copy_from_slice(&plane[s..s + w]);
                dst += w;
            }
        }
    }
}

/// Convenience wrapper assembling into a freshly allocated tensor.
pub fn stylize_tensor(
    net: &Network,
    content: &Tensor,
    style: Option<&Tensor>,
    cfg: &PipelineConfig,
) -> Result<(Tensor, StylizeReport)> {
    let mut sink = TensorSink::new();
    let report = stylize(net, content, style, cfg, &mut sink)?;
    Ok((sink.into_tensor().expect("sink was started"), report))
}

/// Loads PNG inputs and streams the result to a PNG.
pub fn stylize_files(
    net: &Network,
    content: impl AsRef<Path>,
    style: Option<&Path>,
    out: impl AsRef<Path>,
    cfg: &PipelineConfig,
) -> Result<StylizeReport> {
    let content = load_png(content)?;
    let style = style.map(load_png).transpose()?;
    let mut sink = PngBandSink::new(out);
    stylize(net, &content, style.as_ref(), cfg, &mut sink)
}
