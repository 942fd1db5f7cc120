//! 8-bit RGB PNG I/O.
//!
//! Pixels map to floats as `v / 255` on load and `round(clamp(v, 0, 1) * 255)`
//! on store. [`PngRowWriter`] emits rows incrementally so a full-resolution
//! result never has to be resident.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{shape_err, Error, Result};
use crate::tensor::{Dims, Tensor, TensorRef};

pub fn load_png(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Image(other),
        })?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(rgb8_to_tensor(img.as_raw(), w, h))
}

pub fn rgb8_to_tensor(raw: &[u8], w: usize, h: usize) -> Tensor {
    let plane = w * h;
    let mut data = vec![0f32; 3 * plane];
    for (i, px) in raw.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * plane + i] = px[c] as f32 / 255.0;
        }
    }
    Tensor::new(Dims::new(1, 3, h, w), data).expect("length matches dims")
}

#[inline]
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Interleaves rows `[y0, y0 + rows)` of a 1×3×H×W tensor into RGB bytes.
fn interleave_rows(t: TensorRef<'_>, y0: usize, rows: usize, out: &mut Vec<u8>) {
    let d = t.dims();
    out.clear();
    out.reserve(rows * d.w * 3);
    let (r, g, b) = (t.plane(0, 0), t.plane(0, 1), t.plane(0, 2));
    for y in y0..y0 + rows {
        for x in y * d.w..(y + 1) * d.w {
            out.extend_from_slice(&[quantize(r[x]), quantize(g[x]), quantize(b[x])]);
        }
    }
}

fn check_rgb(d: Dims) -> Result<()> {
    if d.n != 1 || d.c != 3 {
        return Err(shape_err!("PNG output needs a 1x3xHxW tensor, got {d}"));
    }
    Ok(())
}

pub fn save_png(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let d = t.dims();
    check_rgb(d)?;
    let mut writer = PngRowWriter::create(path, d.w, d.h)?;
    writer.write_rows(t.view())?;
    writer.finish()
}

/// Streaming PNG encoder accepting rows top to bottom.
pub struct PngRowWriter {
    stream: png::StreamWriter<'static, BufWriter<File>>,
    width: usize,
    height: usize,
    rows_written: usize,
    scratch: Vec<u8>,
}

impl PngRowWriter {
    pub fn create(path: impl AsRef<Path>, width: usize, height: usize) -> Result<Self> {
        let path = path.as_ref();
        if width == 0 || height == 0 {
            return Err(shape_err!("cannot write an empty {width}x{height} PNG"));
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let stream = enc.write_header()?.into_stream_writer()?;
        Ok(PngRowWriter { stream, width, height, rows_written: 0, scratch: Vec::new() })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Appends every row of a 1×3×h×W tensor.
    pub fn write_rows(&mut self, rows: TensorRef<'_>) -> Result<()> {
        let d = rows.dims();
        check_rgb(d)?;
        if d.w != self.width || self.rows_written + d.h > self.height {
            return Err(shape_err!(
                "row band {} does not fit a {}x{} image at row {}",
                d,
                self.width,
                self.height,
                self.rows_written
            ));
        }
        interleave_rows(rows, 0, d.h, &mut self.scratch);
        self.stream
            .write_all(&self.scratch)
            .map_err(|e| Error::Png(png::EncodingError::from(e)))?;
        self.rows_written += d.h;
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        if self.rows_written != self.height {
            return Err(shape_err!("PNG finished after {} of {} rows", self.rows_written, self.height));
        }
        self.stream.finish()?;
        Ok(())
    }
}
