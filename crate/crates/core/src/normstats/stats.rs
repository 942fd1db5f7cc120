use crate::error::{config_err, shape_err, Error, Result};
use crate::tensor::{Tensor, TensorRef};

/// Default variance / eigenvalue floor.
pub const EPS: f32 = 1e-5;

/// Per-(batch, channel) spatial mean and stabilized standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStats {
    n: usize,
    c: usize,
    mean: Vec<f32>,
    std: Vec<f32>,
}

impl ChannelStats {
    pub fn new(n: usize, c: usize, mean: Vec<f32>, std: Vec<f32>) -> Result<Self> {
        if mean.len() != n * c || std.len() != n * c {
            return Err(shape_err!(
                "channel stats need {}x{} values, got mean {} std {}",
                n,
                c,
                mean.len(),
                std.len()
            ));
        }
        Ok(ChannelStats { n, c, mean, std })
    }

    pub fn batch(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn mean(&self) -> &[f32] {
        &self.mean
    }

    pub fn std(&self) -> &[f32] {
        &self.std
    }

    /// Row of statistics to use for batch item `n`. Single-item statistics
    /// broadcast over any batch size.
    fn row(&self, n: usize) -> usize {
        if self.n == 1 {
            0
        } else {
            n
        }
    }

    pub(crate) fn check_against(&self, batch: usize, channels: usize) -> Result<()> {
        if self.c != channels || (self.n != 1 && self.n != batch) {
            return Err(config_err!(
                "statistics for {}x{} do not match a {}-item, {}-channel input",
                self.n,
                self.c,
                batch,
                channels
            ));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn get(&self, n: usize, c: usize) -> (f32, f32) {
        let i = self.row(n) * self.c + c;
        (self.mean[i], self.std[i])
    }
}

/// Learned per-channel scale and shift.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineParams {
    gamma: Vec<f32>,
    beta: Vec<f32>,
}

impl AffineParams {
    pub fn new(gamma: Vec<f32>, beta: Vec<f32>) -> Result<Self> {
        if gamma.len() != beta.len() {
            return Err(shape_err!("gamma has {} values, beta {}", gamma.len(), beta.len()));
        }
        Ok(AffineParams { gamma, beta })
    }

    pub fn identity(channels: usize) -> Self {
        AffineParams { gamma: vec![1.0; channels], beta: vec![0.0; channels] }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f32] {
        &self.gamma
    }

    pub fn beta(&self) -> &[f32] {
        &self.beta
    }
}

fn check_eps(eps: f32) -> Result<()> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Argument(format!("eps must be finite and non-negative, got {eps}")));
    }
    Ok(())
}

/// Spatial mean and `sqrt(population variance + eps)` per (n, c).
pub fn channel_stats(x: &Tensor, eps: f32) -> Result<ChannelStats> {
    channel_stats_view(x.view(), eps)
}

pub(crate) fn channel_stats_view(x: TensorRef<'_>, eps: f32) -> Result<ChannelStats> {
    check_eps(eps)?;
    let d = x.dims();
    if d.plane() == 0 {
        return Err(shape_err!("channel statistics of an empty {}x{} extent", d.h, d.w));
    }
    let count = d.plane() as f64;
    let mut mean = Vec::with_capacity(d.n * d.c);
    let mut std = Vec::with_capacity(d.n * d.c);
    for n in 0..d.n {
        for c in 0..d.c {
            let p = x.plane(n, c);
            let m = p.iter().map(|&v| v as f64).sum::<f64>() / count;
            let var = p.iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / count;
            mean.push(m as f32);
            std.push((var + eps as f64).sqrt() as f32);
        }
    }
    Ok(ChannelStats { n: d.n, c: d.c, mean, std })
}

pub fn instance_norm(x: &Tensor, affine: &AffineParams, eps: f32) -> Result<Tensor> {
    let stats = channel_stats(x, eps)?;
    thumbnail_instance_norm(x, &stats, affine)
}

/// Normalizes `x` with externally supplied statistics, typically captured
/// from a downscaled thumbnail of the full image.
pub fn thumbnail_instance_norm(x: &Tensor, stats: &ChannelStats, affine: &AffineParams) -> Result<Tensor> {
    let mut out = x.clone();
    normalize_in_place(&mut out, stats, Some(affine))?;
    Ok(out)
}

/// `y = gamma * (x - mean) / std + beta`, per (n, c) plane.
pub(crate) fn normalize_in_place(x: &mut Tensor, stats: &ChannelStats, affine: Option<&AffineParams>) -> Result<()> {
    let d = x.dims();
    stats.check_against(d.n, d.c)?;
    if let Some(a) = affine {
        if a.channels() != d.c {
            return Err(config_err!("affine parameters for {} channels, input has {}", a.channels(), d.c));
        }
    }
    for n in 0..d.n {
        for c in 0..d.c {
            let (mean, std) = stats.get(n, c);
            let (gamma, beta) = affine.map_or((1.0, 0.0), |a| (a.gamma[c], a.beta[c]));
            for v in x.plane_mut(n, c) {
                *v = gamma * ((*v - mean) / std) + beta;
            }
        }
    }
    Ok(())
}

/// Re-standardizes `x` from content statistics to style statistics:
/// `y = std_s * (x - mean_c) / std_c + mean_s`.
pub fn adain_transfer(content: &ChannelStats, style: &ChannelStats, x: &Tensor) -> Result<Tensor> {
    let mut out = x.clone();
    adain_in_place(&mut out, content, style, 1.0)?;
    Ok(out)
}

/// AdaIN followed by content/style blending with weight `alpha`, in place.
pub(crate) fn adain_in_place(x: &mut Tensor, content: &ChannelStats, style: &ChannelStats, alpha: f32) -> Result<()> {
    let d = x.dims();
    content.check_against(d.n, d.c)?;
    style.check_against(d.n, d.c)?;
    check_alpha(alpha)?;
    for n in 0..d.n {
        for c in 0..d.c {
            let (mc, sc) = content.get(n, c);
            let (ms, ss) = style.get(n, c);
            for v in x.plane_mut(n, c) {
                let stylized = ss * ((*v - mc) / sc) + ms;
                *v = blend(*v, stylized, alpha);
            }
        }
    }
    Ok(())
}

fn check_alpha(alpha: f32) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Argument(format!("style weight must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

#[inline]
fn blend(content: f32, stylized: f32, alpha: f32) -> f32 {
    if alpha == 1.0 {
        stylized
    } else if alpha == 0.0 {
        content
    } else {
        alpha * stylized + (1.0 - alpha) * content
    }
}

/// `alpha * stylized + (1 - alpha) * content`.
pub fn blend_style(content: &Tensor, stylized: &Tensor, alpha: f32) -> Result<Tensor> {
    check_alpha(alpha)?;
    if content.dims() != stylized.dims() {
        return Err(shape_err!("cannot blend {} with {}", content.dims(), stylized.dims()));
    }
    let data = content
        .data()
        .iter()
        .zip(stylized.data())
        .map(|(&c, &s)| blend(c, s, alpha))
        .collect();
    Tensor::new(content.dims(), data)
}
