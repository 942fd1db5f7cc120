use super::ops::source_index;
use super::{Dims, PadMode, PadSpec, Tensor, TensorRef};
use crate::error::{config_err, shape_err, Result};

/// Convolution kernel in `(out, in, kh, kw)` layout plus one bias per output
/// channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvWeights {
    out_channels: usize,
    in_channels: usize,
    kh: usize,
    kw: usize,
    kernel: Vec<f32>,
    bias: Vec<f32>,
}

impl ConvWeights {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kh: usize,
        kw: usize,
        kernel: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        if out_channels == 0 || kh == 0 || kw == 0 {
            return Err(config_err!("conv weights need out_channels, kh, kw >= 1"));
        }
        if kernel.len() != out_channels * in_channels * kh * kw {
            return Err(shape_err!(
                "kernel has {} values, expected {}x{}x{}x{}",
                kernel.len(),
                out_channels,
                in_channels,
                kh,
                kw
            ));
        }
        if bias.len() != out_channels {
            return Err(shape_err!("bias has {} values, expected {}", bias.len(), out_channels));
        }
        Ok(ConvWeights { out_channels, in_channels, kh, kw, kernel, bias })
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel_size(&self) -> (usize, usize) {
        (self.kh, self.kw)
    }

    pub fn kernel(&self) -> &[f32] {
        &self.kernel
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    #[inline]
    fn tap(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> f32 {
        self.kernel[((oc * self.in_channels + ic) * self.kh + ky) * self.kw + kx]
    }
}

pub(crate) fn conv_output_dims(input: Dims, w: &ConvWeights, stride: usize, pad: PadSpec) -> Result<Dims> {
    if stride == 0 {
        return Err(config_err!("conv stride must be positive"));
    }
    if input.c != w.in_channels {
        return Err(config_err!(
            "conv expects {} input channels, got {}",
            w.in_channels,
            input.c
        ));
    }
    let ph = input.h + pad.top + pad.bottom;
    let pw = input.w + pad.left + pad.right;
    if ph < w.kh || pw < w.kw {
        return Err(shape_err!(
            "padded input {}x{} smaller than {}x{} kernel",
            ph,
            pw,
            w.kh,
            w.kw
        ));
    }
    let oh = (ph - w.kh) / stride + 1;
    let ow = (pw - w.kw) / stride + 1;
    Ok(Dims::new(input.n, w.out_channels, oh, ow))
}

pub fn conv2d(input: &Tensor, w: &ConvWeights, stride: usize, pad: PadSpec) -> Result<Tensor> {
    let mut out = Tensor::with_capacity(0);
    conv2d_into(input.view(), w, stride, pad, &mut out)?;
    Ok(out)
}

/// Direct 2-D convolution with implicit padding.
///
/// Each output row is accumulated in `f64`, so results do not depend on the
/// summation length. Padding is resolved through index mapping instead of a
/// padded copy of the input.
pub fn conv2d_into(
    input: TensorRef<'_>,
    w: &ConvWeights,
    stride: usize,
    pad: PadSpec,
    out: &mut Tensor,
) -> Result<()> {
    let d = input.dims();
    pad.check(d.h, d.w)?;
    let od = conv_output_dims(d, w, stride, pad)?;
    out.reset(od);

    // Source column for every (kx, ox); `None` marks zero padding.
    let cols: Vec<Option<usize>> = (0..w.kw)
        .flat_map(|kx| {
            (0..od.w).map(move |ox| {
                source_index((ox * stride + kx) as isize - pad.left as isize, d.w, pad.mode)
            })
        })
        .collect();
    // Contiguous in-bounds output span per kx, usable for stride 1 only.
    let spans: Vec<(usize, usize)> = (0..w.kw)
        .map(|kx| {
            let lo = pad.left.saturating_sub(kx);
            let hi = (d.w + pad.left).saturating_sub(kx).min(od.w);
            (lo.min(hi), hi)
        })
        .collect();

    let mut acc = vec![0f64; od.w];
    for n in 0..d.n {
        for oc in 0..od.c {
            let bias = w.bias[oc] as f64;
            for oy in 0..od.h {
                acc.fill(bias);
                for ic in 0..d.c {
                    let plane = input.plane(n, ic);
                    for ky in 0..w.kh {
                        let iy = (oy * stride + ky) as isize - pad.top as isize;
                        let Some(sy) = source_index(iy, d.h, pad.mode) else { continue };
                        let src = &plane[sy * d.w..(sy + 1) * d.w];
                        for kx in 0..w.kw {
                            let tap = w.tap(oc, ic, ky, kx) as f64;
                            let col = &cols[kx * od.w..(kx + 1) * od.w];
                            if stride == 1 {
                                let (lo, hi) = spans[kx];
                                let off = lo + kx - pad.left;
                                for (a, &v) in acc[lo..hi].iter_mut().zip(&src[off..off + hi - lo]) {
                                    *a += tap * v as f64;
                                }
                                if pad.mode == PadMode::Reflect {
                                    for ox in (0..lo).chain(hi..od.w) {
                                        if let Some(sx) = col[ox] {
                                            acc[ox] += tap * src[sx] as f64;
                                        }
                                    }
                                }
                            } else {
                                for (a, sx) in acc.iter_mut().zip(col) {
                                    if let Some(sx) = *sx {
                                        *a += tap * src[sx] as f64;
                                    }
                                }
                            }
                        }
                    }
                }
                let dst = out.plane_mut(n, oc);
                for (o, &a) in dst[oy * od.w..(oy + 1) * od.w].iter_mut().zip(&acc) {
                    *o = a as f32;
                }
            }
        }
    }
    Ok(())
}
