//! Destinations for the owned regions of stylized patches.
//!
//! Patches may complete in any order. A sink must produce the same output
//! regardless of that order.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{shape_err, Result};
use crate::image_io::PngRowWriter;
use crate::tensor::{Dims, Tensor, TensorRef};
use crate::tiler::{copy_region, place_patch, TilePlan};

pub trait OwnershipSink: Send {
    /// Called once before any patch, with the output dims.
    fn begin(&mut self, plan: &TilePlan, channels: usize) -> Result<()>;

    /// Receives the full network output for window `i` (batch 1).
    fn put(&mut self, plan: &TilePlan, i: usize, patch: TensorRef<'_>) -> Result<()>;

    fn finish(&mut self) -> Result<()>;
}

/// Assembles into an in-memory tensor. The tensor is allocated by
/// [`TensorSink::new`] or on `begin`, whichever comes first.
#[derive(Debug, Default)]
pub struct TensorSink {
    out: Option<Tensor>,
}

impl TensorSink {
    pub fn new() -> Self {
        TensorSink { out: None }
    }

    /// Preallocates the output.
    pub fn with_dims(dims: Dims) -> Self {
        TensorSink { out: Some(Tensor::zeros(dims)) }
    }

    pub fn into_tensor(self) -> Option<Tensor> {
        self.out
    }

    pub fn tensor(&self) -> Option<&Tensor> {
        self.out.as_ref()
    }
}

impl OwnershipSink for TensorSink {
    fn begin(&mut self, plan: &TilePlan, channels: usize) -> Result<()> {
        let dims = Dims::new(1, channels, plan.height, plan.width);
        match &self.out {
            Some(t) if t.dims() == dims => {}
            Some(t) => return Err(shape_err!("sink holds {}, output is {dims}", t.dims())),
            None => self.out = Some(Tensor::zeros(dims)),
        }
        Ok(())
    }

    fn put(&mut self, plan: &TilePlan, i: usize, patch: TensorRef<'_>) -> Result<()> {
        let out = self.out.as_mut().expect("begin called");
        place_patch(out, plan, i, patch)
    }

    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Streams the result into a PNG one tile row at a time.
///
/// Each tile row owns a horizontal band of the output. A band is buffered
/// until all its patches have arrived and is written once every band above
/// it has been written.
pub struct PngBandSink {
    writer: Option<PngRowWriter>,
    path: std::path::PathBuf,
    bands: BTreeMap<usize, Band>,
    next_band: usize,
}

struct Band {
    data: Tensor,
    missing: usize,
}

impl PngBandSink {
    pub fn new(path: impl AsRef<Path>) -> Self {
        PngBandSink { writer: None, path: path.as_ref().to_owned(), bands: BTreeMap::new(), next_band: 0 }
    }

    fn flush_ready(&mut self) -> Result<()> {
        while self.bands.get(&self.next_band).is_some_and(|b| b.missing == 0) {
            let band = self.bands.remove(&self.next_band).expect("checked");
            self.writer.as_mut().expect("begin called").write_rows(band.data.view())?;
            self.next_band += 1;
        }
        Ok(())
    }
}

impl OwnershipSink for PngBandSink {
    fn begin(&mut self, plan: &TilePlan, channels: usize) -> Result<()> {
        if channels != 3 {
            return Err(shape_err!("PNG output needs 3 channels, network produces {channels}"));
        }
        self.writer = Some(PngRowWriter::create(&self.path, plan.width, plan.height)?);
        self.bands.clear();
        self.next_band = 0;
        Ok(())
    }

    fn put(&mut self, plan: &TilePlan, i: usize, patch: TensorRef<'_>) -> Result<()> {
        let row = i / plan.cols;
        let own = plan.ownership[i];
        let band = self.bands.entry(row).or_insert_with(|| Band {
            data: Tensor::zeros(Dims::new(1, 3, own.h, plan.width)),
            missing: plan.cols,
        });
        let win = plan.windows[i];
        let d = patch.dims();
        if d.h != win.h || d.w != win.w {
            return Err(shape_err!("patch {i} is {}x{}, window is {}x{}", d.h, d.w, win.h, win.w));
        }
        copy_region(patch, plan.local_ownership(i), &mut band.data, own.x, 0)?;
        band.missing -= 1;
        self.flush_ready()
    }

    fn finish(&mut self) -> Result<()> {
        self.flush_ready()?;
        if !self.bands.is_empty() {
            return Err(shape_err!("{} output bands never completed", self.bands.len()));
        }
        self.writer.take().expect("begin called").finish()
    }
}
