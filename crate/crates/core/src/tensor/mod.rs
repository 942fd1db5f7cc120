//! Dense rank-4 `f32` tensors in batch–channel–height–width order and the
//! small set of kernels the stylization networks need.
//!
//! Every kernel comes in two flavours: a functional form that allocates its
//! result (`conv2d`, `pad`, ...) and an `*_into` form that writes into a
//! caller-owned buffer. The executor uses the latter so that the working set
//! of a forward pass is a fixed, pre-reserved pair of buffers.

mod conv;
mod ops;

pub use conv::{conv2d, conv2d_into, ConvWeights};
pub use ops::{
    maxpool2, maxpool2_into, pad, pad_into, relu, relu_in_place, resize_bilinear,
    resize_bilinear_into, resize_nearest, resize_nearest_into, PadMode, PadSpec,
};

use std::fmt;

use crate::error::{shape_err, Result};

/// Tensor extents in NCHW order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Dims {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Dims {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Dims { n, c, h, w }
    }

    pub const fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn plane(&self) -> usize {
        self.h * self.w
    }

    pub const fn with_spatial(self, h: usize, w: usize) -> Self {
        Dims { h, w, ..self }
    }

    pub const fn with_channels(self, c: usize) -> Self {
        Dims { c, ..self }
    }

    #[inline]
    pub const fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.c + c) * self.h + y) * self.w + x
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// Borrowed tensor: dims plus a slice of exactly `dims.len()` values.
#[derive(Clone, Copy, Debug)]
pub struct TensorRef<'a> {
    dims: Dims,
    data: &'a [f32],
}

impl<'a> TensorRef<'a> {
    pub fn new(dims: Dims, data: &'a [f32]) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(shape_err!("{} values for dims {}", data.len(), dims));
        }
        Ok(TensorRef { dims, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &'a [f32] {
        self.data
    }

    pub fn plane(&self, n: usize, c: usize) -> &'a [f32] {
        let p = self.dims.plane();
        let start = (n * self.dims.c + c) * p;
        &self.data[start..start + p]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor { dims: self.dims, data: self.data.to_vec() }
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor {
    dims: Dims,
    data: Vec<f32>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("dims", &self.dims)
            .field("len", &self.data.len())
            .finish()
    }
}

impl Tensor {
    pub fn new(dims: Dims, data: Vec<f32>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(shape_err!("{} values for dims {}", data.len(), dims));
        }
        Ok(Tensor { dims, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        Self::full(dims, 0.0)
    }

    pub fn full(dims: Dims, value: f32) -> Self {
        Tensor { dims, data: vec![value; dims.len()] }
    }

    /// Builds a tensor by evaluating `f(n, c, y, x)` at every index.
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for n in 0..dims.n {
            for c in 0..dims.c {
                for y in 0..dims.h {
                    for x in 0..dims.w {
                        data.push(f(n, c, y, x));
                    }
                }
            }
        }
        Tensor { dims, data }
    }

    /// Empty tensor whose buffer can later grow to `capacity` values without
    /// reallocating.
    pub fn with_capacity(capacity: usize) -> Self {
        Tensor { dims: Dims::default(), data: Vec::with_capacity(capacity) }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.data.capacity()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn view(&self) -> TensorRef<'_> {
        TensorRef { dims: self.dims, data: &self.data }
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.dims.index(n, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, y: usize, x: usize, v: f32) {
        let i = self.dims.index(n, c, y, x);
        self.data[i] = v;
    }

    pub fn plane(&self, n: usize, c: usize) -> &[f32] {
        let p = self.dims.plane();
        let start = (n * self.dims.c + c) * p;
        &self.data[start..start + p]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [f32] {
        let p = self.dims.plane();
        let start = (n * self.dims.c + c) * p;
        &mut self.data[start..start + p]
    }

    /// Re-dimensions the tensor in place. Contents are unspecified afterwards;
    /// the allocation is reused whenever it is large enough.
    pub(crate) fn reset(&mut self, dims: Dims) {
        self.dims = dims;
        self.data.clear();
        self.data.resize(dims.len(), 0.0);
    }

    pub fn reshape(mut self, dims: Dims) -> Result<Self> {
        if dims.len() != self.data.len() {
            return Err(shape_err!("cannot reshape {} into {}", self.dims, dims));
        }
        self.dims = dims;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor { dims: self.dims, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute elementwise difference. Panics on mismatched dims.
    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        assert_eq!(self.dims, other.dims, "max_abs_diff on mismatched dims");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    /// Copies the spatial rectangle `(x0, y0, w, h)` of every (n, c) plane.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Tensor> {
        let mut out = Tensor::with_capacity(self.dims.n * self.dims.c * w * h);
        crop_into(self.view(), x0, y0, w, h, &mut out)?;
        Ok(out)
    }

    /// Writes `src` into this tensor with its top-left corner at `(x0, y0)`.
    pub fn paste(&mut self, src: TensorRef<'_>, x0: usize, y0: usize) -> Result<()> {
        let (d, s) = (self.dims, src.dims());
        if d.n != s.n || d.c != s.c || x0 + s.w > d.w || y0 + s.h > d.h {
            return Err(shape_err!("cannot paste {} at ({x0},{y0}) into {}", s, d));
        }
        for n in 0..s.n {
            for c in 0..s.c {
                let sp = src.plane(n, c);
                let dp = self.plane_mut(n, c);
                for y in 0..s.h {
                    let row = &sp[y * s.w..(y + 1) * s.w];
                    let start = (y0 + y) * d.w + x0;
                    dp[start..start + s.w].copy_from_slice(row);
                }
            }
        }
        Ok(())
    }

    /// Stacks equally shaped tensors along the batch axis.
    pub fn stack(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or_else(|| shape_err!("cannot stack zero tensors"))?;
        let d = first.dims;
        let mut data = Vec::with_capacity(d.len() * parts.len());
        let mut n = 0;
        for p in parts {
            if p.dims.c != d.c || p.dims.h != d.h || p.dims.w != d.w {
                return Err(shape_err!("cannot stack {} with {}", p.dims, d));
            }
            n += p.dims.n;
            data.extend_from_slice(&p.data);
        }
        Tensor::new(Dims { n, ..d }, data)
    }

    /// Extracts batch item `n` as a single-item tensor.
    pub fn batch_item(&self, n: usize) -> Tensor {
        let d = self.dims;
        let per = d.c * d.plane();
        Tensor {
            dims: Dims { n: 1, ..d },
            data: self.data[n * per..(n + 1) * per].to_vec(),
        }
    }
}

pub(crate) fn crop_into(
    src: TensorRef<'_>,
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    out: &mut Tensor,
) -> Result<()> {
    let d = src.dims();
    if w == 0 || h == 0 || x0 + w > d.w || y0 + h > d.h {
        return Err(shape_err!("window ({x0},{y0},{w},{h}) outside {}x{} image", d.w, d.h));
    }
    out.reset(d.with_spatial(h, w));
    let mut dst = 0;
    let data = &mut out.data;
    for n in 0..d.n {
        for c in 0..d.c {
            let plane = src.plane(n, c);
            for y in y0..y0 + h {
                let start = y * d.w + x0;
                data[dst..dst + w].copy_from_slice(&plane[start..start + w]);
                dst += w;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_wrong_length() {
        assert!(Tensor::new(Dims::new(1, 1, 2, 2), vec![0.0; 3]).is_err());
    }

    #[test]
    fn crop_and_paste_round_trip() {
        let t = Tensor::from_fn(Dims::new(1, 2, 5, 7), |_, c, y, x| (c * 100 + y * 10 + x) as f32);
        let c = t.crop(2, 1, 3, 2).unwrap();
        assert_eq!(c.dims(), Dims::new(1, 2, 2, 3));
        assert_eq!(c.get(0, 1, 1, 2), 124.0);
        let mut z = Tensor::zeros(t.dims());
        z.paste(c.view(), 2, 1).unwrap();
        assert_eq!(z.get(0, 1, 2, 4), 124.0);
        assert_eq!(z.get(0, 1, 0, 0), 0.0);
        assert!(t.crop(5, 0, 3, 1).is_err());
    }

    #[test]
    fn stack_and_split_batches() {
        let a = Tensor::full(Dims::new(1, 2, 2, 2), 1.0);
        let b = Tensor::full(Dims::new(1, 2, 2, 2), 2.0);
        let s = Tensor::stack(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(s.dims().n, 2);
        assert_eq!(s.batch_item(1), b);
        assert_eq!(s.batch_item(0), a);
    }
}
