//! Forward-only losses and diagnostics.
//!
//! * Stroke perceptual loss between a stylized patch and the matching crop of
//!   the stylized thumbnail, measured in encoder feature space and averaged
//!   per feature element so values are comparable across patch sizes.
//! * Gram consistency: mean pairwise distance between the Gram matrices of
//!   a set of patches. Low when patches share one style.

use serde::Serialize;

use crate::error::{shape_err, Error, Result};
use crate::network::{ExecOptions, Network, NetworkGraph, StatsMode, WeightStore};
use crate::normstats::StatsBank;
use crate::tensor::{resize_bilinear, Tensor};
use crate::tiler::{extract_patch, Rect, TilePlan};

/// An encoder truncated at a probe layer.
pub struct FeatureExtractor {
    net: Network,
    probe: String,
}

impl FeatureExtractor {
    /// Truncates `graph` after the layer named `probe`.
    pub fn new(graph: &NetworkGraph, weights: &WeightStore, probe: &str) -> Result<Self> {
        let idx = graph
            .layer_index(probe)
            .ok_or_else(|| Error::Config(format!("probe layer {probe:?} not found in graph")))?;
        let net = Network::new(graph.prefix(idx), weights)?;
        Ok(FeatureExtractor { net, probe: probe.to_owned() })
    }

    pub fn probe(&self) -> &str {
        &self.probe
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    /// Probe-layer features. Norm layers inside the encoder use the input's
    /// own statistics.
    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        let mut scratch = StatsBank::new();
        self.net.forward_with(x, StatsMode::Capture(&mut scratch), ExecOptions::default())
    }
}

/// `‖F(patch) − F(target)‖² / count`, where `count` is the number of feature
/// elements.
pub fn stroke_perceptual_loss(patch: &Tensor, target: &Tensor, fx: &FeatureExtractor) -> Result<f64> {
    if patch.dims() != target.dims() {
        return Err(shape_err!("patch {} and target {} differ", patch.dims(), target.dims()));
    }
    let a = fx.features(patch)?;
    let b = fx.features(target)?;
    Ok(mean_squared_diff(a.data(), b.data()))
}

fn mean_squared_diff(a: &[f32], b: &[f32]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let sum: f64 = a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
    sum / a.len() as f64
}

/// The crop of the stylized thumbnail that corresponds to content `window`,
/// upsampled bilinearly to `out_h × out_w`.
///
/// `scale` is content size over thumbnail size. Window edges are divided by
/// it and rounded to the nearest thumbnail pixel.
pub fn crop_and_upsample_target(
    thumb: &Tensor,
    window: Rect,
    scale: f64,
    out_h: usize,
    out_w: usize,
) -> Result<Tensor> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Argument(format!("scale ratio must be positive, got {scale}")));
    }
    let d = thumb.dims();
    let map = |v: usize, limit: usize| ((v as f64 / scale).round() as usize).min(limit);
    let x0 = map(window.x, d.w);
    let y0 = map(window.y, d.h);
    let x1 = map(window.x + window.w, d.w);
    let y1 = map(window.y + window.h, d.h);
    if x1 <= x0 || y1 <= y0 {
        return Err(shape_err!("window {window:?} maps to an empty thumbnail crop at scale {scale}"));
    }
    let crop = thumb.crop(x0, y0, x1 - x0, y1 - y0)?;
    resize_bilinear(&crop, out_h, out_w)
}

/// `l_original + lambda · l_sp`.
pub fn total_loss(l_original: f64, l_sp: f64, lambda: f64) -> f64 {
    l_original + lambda * l_sp
}

/// Per batch item, the `C × C` matrix `F Fᵀ / (H·W)`, row-major, in `f64`.
pub fn gram_matrix(features: &Tensor) -> Vec<Vec<f64>> {
    let d = features.dims();
    let hw = d.plane().max(1) as f64;
    (0..d.n)
        .map(|n| {
            let mut g = vec![0f64; d.c * d.c];
            for i in 0..d.c {
                let fi = features.plane(n, i);
                for j in i..d.c {
                    let fj = features.plane(n, j);
                    let s: f64 = fi.iter().zip(fj).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>() / hw;
                    g[i * d.c + j] = s;
                    g[j * d.c + i] = s;
                }
            }
            g
        })
        .collect()
}

fn frobenius_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mean pairwise Frobenius distance between the Gram matrices of the probe
/// features of `patches` (each a single image).
pub fn gram_consistency(patches: &[Tensor], fx: &FeatureExtractor) -> Result<f64> {
    if patches.len() < 2 {
        return Err(Error::Argument(format!("gram consistency needs at least 2 patches, got {}", patches.len())));
    }
    let grams = patches
        .iter()
        .map(|p| {
            let f = fx.features(p)?;
            Ok(gram_matrix(&f).into_iter().flatten().collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_pairwise_distance(&grams))
}

pub(crate) fn mean_pairwise_distance(grams: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..grams.len() {
        for j in i + 1..grams.len() {
            sum += frobenius_distance(&grams[i], &grams[j]);
            pairs += 1;
        }
    }
    sum / pairs.max(1) as f64
}

/// Full network output for every window of `plan`, without assembly.
///
/// With `bank` every window runs on those frozen statistics. Without, each
/// window normalizes with its own statistics.
pub fn window_outputs(net: &Network, image: &Tensor, plan: &TilePlan, bank: Option<&StatsBank>) -> Result<Vec<Tensor>> {
    plan.windows
        .iter()
        .map(|&w| {
            let patch = extract_patch(image, w)?;
            match bank {
                Some(b) => net.forward_frozen(&patch, b),
                None => net.forward(&patch, &mut StatsBank::new()),
            }
        })
        .collect()
}

/// One run's metrics, serialized as `{"l_sp": …, "gram_consistency": …}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub l_sp: f64,
    pub gram_consistency: f64,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }
}
