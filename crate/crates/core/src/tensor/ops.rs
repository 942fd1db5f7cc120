use serde::{Deserialize, Serialize};

use super::{Tensor, TensorRef};
use crate::error::{shape_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PadMode {
    #[default]
    Zero,
    /// Mirror about the edge sample, excluding it: `[1,2,3]` padded by one
    /// becomes `[2,1,2,3,2]`.
    Reflect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct PadSpec {
    pub mode: PadMode,
    pub left: usize,
    pub right: usize,
    pub top: usize,
    pub bottom: usize,
}

impl PadSpec {
    pub const NONE: PadSpec = PadSpec { mode: PadMode::Zero, left: 0, right: 0, top: 0, bottom: 0 };

    pub const fn uniform(mode: PadMode, amount: usize) -> Self {
        PadSpec { mode, left: amount, right: amount, top: amount, bottom: amount }
    }

    pub fn is_none(&self) -> bool {
        self.left == 0 && self.right == 0 && self.top == 0 && self.bottom == 0
    }

    pub(crate) fn check(&self, h: usize, w: usize) -> Result<()> {
        let horiz = self.left.max(self.right);
        let vert = self.top.max(self.bottom);
        if self.mode == PadMode::Reflect && ((horiz > 0 && horiz >= w) || (vert > 0 && vert >= h)) {
            return Err(shape_err!(
                "reflect padding (l{} r{} t{} b{}) must be smaller than the {}x{} input",
                self.left,
                self.right,
                self.top,
                self.bottom,
                h,
                w
            ));
        }
        Ok(())
    }
}

/// Maps a possibly out-of-range coordinate onto the source axis, or `None`
/// when it falls in zero padding.
#[inline]
pub(crate) fn source_index(i: isize, len: usize, mode: PadMode) -> Option<usize> {
    let n = len as isize;
    if (0..n).contains(&i) {
        return Some(i as usize);
    }
    match mode {
        PadMode::Zero => None,
        PadMode::Reflect => {
            let r = if i < 0 { -i } else { 2 * (n - 1) - i };
            debug_assert!((0..n).contains(&r));
            Some(r as usize)
        }
    }
}

pub fn pad(input: &Tensor, spec: PadSpec) -> Result<Tensor> {
    let mut out = Tensor::with_capacity(0);
    pad_into(input.view(), spec, &mut out)?;
    Ok(out)
}

pub fn pad_into(input: TensorRef<'_>, spec: PadSpec, out: &mut Tensor) -> Result<()> {
    let d = input.dims();
    spec.check(d.h, d.w)?;
    let (oh, ow) = (d.h + spec.top + spec.bottom, d.w + spec.left + spec.right);
    out.reset(d.with_spatial(oh, ow));
    let cols: Vec<Option<usize>> = (0..ow)
        .map(|x| source_index(x as isize - spec.left as isize, d.w, spec.mode))
        .collect();
    for n in 0..d.n {
        for c in 0..d.c {
            let src = input.plane(n, c);
            let dst = out.plane_mut(n, c);
            for y in 0..oh {
                let row = &mut dst[y * ow..(y + 1) * ow];
                match source_index(y as isize - spec.top as isize, d.h, spec.mode) {
                    None => row.fill(0.0),
                    Some(sy) => {
                        let srow = &src[sy * d.w..(sy + 1) * d.w];
                        for (v, col) in row.iter_mut().zip(&cols) {
                            *v = col.map_or(0.0, |sx| srow[sx]);
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    relu_in_place(out.data_mut());
    out
}

pub fn relu_in_place(data: &mut [f32]) {
    for v in data {
        *v = v.max(0.0);
    }
}

/// 2×2 max pooling with stride 2. Odd extents are first padded by one
/// replicated edge row/column, so the output is `ceil(h/2) × ceil(w/2)`.
pub fn maxpool2(input: &Tensor) -> Tensor {
    let mut out = Tensor::with_capacity(0);
    maxpool2_into(input.view(), &mut out);
    out
}

pub fn maxpool2_into(input: TensorRef<'_>, out: &mut Tensor) {
    let d = input.dims();
    let (oh, ow) = (d.h.div_ceil(2), d.w.div_ceil(2));
    out.reset(d.with_spatial(oh, ow));
    for n in 0..d.n {
        for c in 0..d.c {
            let src = input.plane(n, c);
            let dst = out.plane_mut(n, c);
            for oy in 0..oh {
                let y0 = 2 * oy;
                let y1 = (y0 + 1).min(d.h - 1);
                for ox in 0..ow {
                    let x0 = 2 * ox;
                    let x1 = (x0 + 1).min(d.w - 1);
                    let m = src[y0 * d.w + x0]
                        .max(src[y0 * d.w + x1])
                        .max(src[y1 * d.w + x0])
                        .max(src[y1 * d.w + x1]);
                    dst[oy * ow + ox] = m;
                }
            }
        }
    }
}

/// Per-axis sampling taps for half-pixel-centre bilinear interpolation.
struct Taps {
    lo: Vec<usize>,
    hi: Vec<usize>,
    frac: Vec<f32>,
}

fn bilinear_taps(src: usize, dst: usize) -> Taps {
    let scale = src as f64 / dst as f64;
    let max = (src - 1) as f64;
    let mut taps = Taps { lo: Vec::with_capacity(dst), hi: Vec::with_capacity(dst), frac: Vec::with_capacity(dst) };
    for i in 0..dst {
        let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
        let lo = s.floor() as usize;
        taps.lo.push(lo);
        taps.hi.push((lo + 1).min(src - 1));
        taps.frac.push((s - lo as f64) as f32);
    }
    taps
}

/// Bilinear resize with half-pixel centres: destination pixel `i` samples
/// source coordinate `(i + 0.5) * src/dst - 0.5`, clamped to the edge.
pub fn resize_bilinear(input: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let mut out = Tensor::with_capacity(0);
    resize_bilinear_into(input.view(), out_h, out_w, &mut out)?;
    Ok(out)
}

pub fn resize_bilinear_into(input: TensorRef<'_>, out_h: usize, out_w: usize, out: &mut Tensor) -> Result<()> {
    let d = input.dims();
    if out_h == 0 || out_w == 0 {
        return Err(shape_err!("resize target {out_h}x{out_w} is empty"));
    }
    if d.h == 0 || d.w == 0 {
        return Err(shape_err!("cannot resize empty {d}"));
    }
    out.reset(d.with_spatial(out_h, out_w));
    if (d.h, d.w) == (out_h, out_w) {
        out.data_mut().copy_from_slice(input.data());
        return Ok(());
    }
    let ty = bilinear_taps(d.h, out_h);
    let tx = bilinear_taps(d.w, out_w);
    let mut row_lo = vec![0f32; out_w];
    let mut row_hi = vec![0f32; out_w];
    for n in 0..d.n {
        for c in 0..d.c {
            let src = input.plane(n, c);
            let dst = out.plane_mut(n, c);
            for oy in 0..out_h {
                let (ylo, yhi, fy) = (ty.lo[oy], ty.hi[oy], ty.frac[oy]);
                let a = &src[ylo * d.w..(ylo + 1) * d.w];
                let b = &src[yhi * d.w..(yhi + 1) * d.w];
                for ox in 0..out_w {
                    let (xl, xh, fx) = (tx.lo[ox], tx.hi[ox], tx.frac[ox]);
                    row_lo[ox] = a[xl] + (a[xh] - a[xl]) * fx;
                    row_hi[ox] = b[xl] + (b[xh] - b[xl]) * fx;
                }
                let out_row = &mut dst[oy * out_w..(oy + 1) * out_w];
                for ((o, &l), &h) in out_row.iter_mut().zip(&row_lo).zip(&row_hi) {
                    *o = l + (h - l) * fy;
                }
            }
        }
    }
    Ok(())
}

/// Nearest-neighbour upsampling by an integer factor.
pub fn resize_nearest(input: &Tensor, factor: usize) -> Result<Tensor> {
    let mut out = Tensor::with_capacity(0);
    resize_nearest_into(input.view(), factor, &mut out)?;
    Ok(out)
}

pub fn resize_nearest_into(input: TensorRef<'_>, factor: usize, out: &mut Tensor) -> Result<()> {
    if factor == 0 {
        return Err(shape_err!("upsample factor must be positive"));
    }
    let d = input.dims();
    let (oh, ow) = (d.h * factor, d.w * factor);
    out.reset(d.with_spatial(oh, ow));
    for n in 0..d.n {
        for c in 0..d.c {
            let src = input.plane(n, c);
            let dst = out.plane_mut(n, c);
            for y in 0..d.h {
                let srow = &src[y * d.w..(y + 1) * d.w];
                let first = y * factor * ow;
                {
                    let drow = &mut dst[first..first + ow];
                    for (x, &v) in srow.iter().enumerate() {
                        drow[x * factor..(x + 1) * factor].fill(v);
                    }
                }
                for r in 1..factor {
                    dst.copy_within(first..first + ow, first + r * ow);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Dims;

    fn row(values: &[f32]) -> Tensor {
        Tensor::new(Dims::new(1, 1, 1, values.len()), values.to_vec()).unwrap()
    }

    #[test]
    fn relu_clamps_negatives() {
        assert_eq!(relu(&row(&[-1.0, 0.0, 2.0])).data(), &[0.0, 0.0, 2.0]);
        let pos = row(&[0.5, 1.0, 3.0]);
        assert_eq!(relu(&pos), pos);
    }

    #[test]
    fn maxpool_picks_window_max() {
        let t = Tensor::new(Dims::new(1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(maxpool2(&t).data(), &[4.0]);
        let c = Tensor::full(Dims::new(1, 2, 6, 4), 1.5);
        assert_eq!(maxpool2(&c), Tensor::full(Dims::new(1, 2, 3, 2), 1.5));
    }

    #[test]
    fn maxpool_odd_extent_replicates_edge() {
        let t = Tensor::new(Dims::new(1, 1, 3, 3), (1..=9).map(|v| v as f32).collect()).unwrap();
        let p = maxpool2(&t);
        assert_eq!(p.dims(), Dims::new(1, 1, 2, 2));
        assert_eq!(p.data(), &[5.0, 6.0, 8.0, 9.0]);
    }

    #[test]
    fn bilinear_half_pixel_upsample() {
        let out = resize_bilinear(&row(&[0.0, 2.0]), 1, 4).unwrap();
        assert_eq!(out.data(), &[0.0, 0.5, 1.5, 2.0]);
    }

    #[test]
    fn bilinear_identity_and_constant() {
        let t = Tensor::from_fn(Dims::new(1, 2, 5, 3), |_, c, y, x| (c + y * 3 + x) as f32 * 0.1);
        assert_eq!(resize_bilinear(&t, 5, 3).unwrap(), t);
        let k = Tensor::full(Dims::new(1, 3, 7, 5), 0.25);
        let r = resize_bilinear(&k, 3, 11).unwrap();
        assert!(r.data().iter().all(|&v| (v - 0.25).abs() < 1e-7));
        assert!(resize_bilinear(&k, 0, 2).is_err());
    }

    #[test]
    fn nearest_replicates() {
        let t = Tensor::full(Dims::new(1, 1, 1, 1), 7.0);
        assert_eq!(resize_nearest(&t, 2).unwrap(), Tensor::full(Dims::new(1, 1, 2, 2), 7.0));
        let r = Tensor::from_fn(Dims::new(1, 1, 2, 3), |_, _, y, x| (y * 3 + x) as f32);
        assert_eq!(resize_nearest(&r, 1).unwrap(), r);
    }

    #[test]
    fn zero_pad_surrounds() {
        let t = Tensor::full(Dims::new(1, 1, 1, 1), 5.0);
        let p = pad(&t, PadSpec::uniform(PadMode::Zero, 1)).unwrap();
        assert_eq!(p.data(), &[0.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn reflect_pad_mirrors_excluding_edge() {
        let spec = PadSpec { mode: PadMode::Reflect, left: 1, right: 1, top: 0, bottom: 0 };
        let p = pad(&row(&[1.0, 2.0, 3.0]), spec).unwrap();
        assert_eq!(p.data(), &[2.0, 1.0, 2.0, 3.0, 2.0]);
    }

    #[test]
    fn reflect_pad_too_large_is_error() {
        let spec = PadSpec { mode: PadMode::Reflect, left: 3, right: 0, top: 0, bottom: 0 };
        assert!(pad(&row(&[1.0, 2.0, 3.0]), spec).is_err());
    }

    #[test]
    fn zero_amount_pad_is_identity() {
        let t = Tensor::from_fn(Dims::new(2, 2, 3, 4), |n, c, y, x| (n + c + y + x) as f32);
        assert_eq!(pad(&t, PadSpec::NONE).unwrap(), t);
        assert_eq!(pad(&t, PadSpec::uniform(PadMode::Reflect, 0)).unwrap(), t);
    }
}
