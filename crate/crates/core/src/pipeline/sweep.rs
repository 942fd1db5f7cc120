//! Normalization statistics versus thumbnail scale.
//!
//! An image is resized to several shorter-side scales and encoded; per-channel
//! means and standard deviations are recorded at probe layers. Deviations
//! are measured against the largest scale.

use serde::Serialize;

use super::thumbnail_dims;
use crate::error::{Error, Result};
use crate::network::{ExecOptions, Network, StatsMode, Workspace};
use crate::normstats::StatsBank;
use crate::tensor::{resize_bilinear, Tensor, TensorRef};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub scale: usize,
    pub layer: String,
    pub mean_abs_mu: f64,
    pub mean_sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    /// Effective scales, after clamping to the image's shorter side.
    pub scales: Vec<usize>,
    pub layers: Vec<String>,
    /// `[scale][layer][channel]`.
    pub mu: Vec<Vec<Vec<f64>>>,
    pub sigma: Vec<Vec<Vec<f64>>>,
}

fn plane_stats(x: TensorRef<'_>) -> (Vec<f64>, Vec<f64>) {
    let d = x.dims();
    let mut mu = Vec::with_capacity(d.c);
    let mut sigma = Vec::with_capacity(d.c);
    for c in 0..d.c {
        let p = x.plane(0, c);
        let n = p.len() as f64;
        let m = p.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = p.iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / n;
        mu.push(m);
        sigma.push(var.sqrt());
    }
    (mu, sigma)
}

/// Runs `encoder` on `image` resized to each scale and records per-channel
/// statistics after each probe layer. Scales must be ascending; scales
/// beyond the image's shorter side are clamped to it.
pub fn stats_sweep(image: &Tensor, encoder: &Network, probes: &[&str], scales: &[usize]) -> Result<SweepResult> {
    if scales.is_empty() || scales.windows(2).any(|p| p[0] >= p[1]) || scales[0] == 0 {
        return Err(Error::Argument(format!("scales must be positive and strictly ascending, got {scales:?}")));
    }
    let d = image.dims();
    if d.n != 1 {
        return Err(Error::Argument(format!("sweep takes a single image, got {d}")));
    }
    let idx = probes
        .iter()
        .map(|p| encoder.graph().layer_index(p).ok_or_else(|| Error::Config(format!("probe layer {p:?} not in graph"))))
        .collect::<Result<Vec<usize>>>()?;
    let end = idx.iter().max().map_or(0, |m| m + 1);
    let short = d.h.min(d.w);
    let mut result = SweepResult {
        scales: Vec::with_capacity(scales.len()),
        layers: probes.iter().map(|s| s.to_string()).collect(),
        mu: Vec::new(),
        sigma: Vec::new(),
    };
    let opts = ExecOptions::default();
    for &requested in scales {
        let scale = if requested > short {
            log::warn!("scale {requested} exceeds the image's shorter side {short}; clamped");
            short
        } else {
            requested
        };
        let (h, w) = thumbnail_dims(d.h, d.w, scale);
        let resized;
        let input = if (h, w) == (d.h, d.w) {
            image.view()
        } else {
            resized = resize_bilinear(image, h, w)?;
            resized.view()
        };
        let cap = encoder.peak_activation(input.dims(), 0..end)?;
        let mut ws = Workspace::with_capacity(cap);
        let mut bank = StatsBank::new();
        let mut mu = vec![Vec::new(); idx.len()];
        let mut sigma = vec![Vec::new(); idx.len()];
        encoder.run(input, StatsMode::Capture(&mut bank), opts, &mut ws, 0..end, &mut |i, t| {
            for (k, &p) in idx.iter().enumerate() {
                if p == i {
                    (mu[k], sigma[k]) = plane_stats(t);
                }
            }
        })?;
        result.scales.push(scale);
        result.mu.push(mu);
        result.sigma.push(sigma);
    }
    Ok(result)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len().max(1) as f64
}

impl SweepResult {
    pub fn rows(&self) -> Vec<SweepRow> {
        let mut rows = Vec::with_capacity(self.scales.len() * self.layers.len());
        for (s, &scale) in self.scales.iter().enumerate() {
            for (l, layer) in self.layers.iter().enumerate() {
                rows.push(SweepRow {
                    scale,
                    layer: layer.clone(),
                    mean_abs_mu: self.mu[s][l].iter().map(|v| v.abs()).sum::<f64>() / self.mu[s][l].len().max(1) as f64,
                    mean_sigma: mean(&self.sigma[s][l]),
                });
            }
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("scale,layer,mean_abs_mu,mean_sigma\n");
        for r in self.rows() {
            out.push_str(&format!("{},{},{},{}\n", r.scale, r.layer, r.mean_abs_mu, r.mean_sigma));
        }
        out
    }

    /// `[scale][layer]` mean absolute per-channel deviation of μ and σ from
    /// the largest scale.
    pub fn deviations(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let last = self.scales.len() - 1;
        let dev = |stats: &Vec<Vec<Vec<f64>>>| -> Vec<Vec<f64>> {
            stats
                .iter()
                .map(|per_layer| {
                    per_layer.iter().zip(&stats[last]).map(|(a, b)| mean_abs_diff(a, b)).collect()
                })
                .collect()
        };
        (dev(&self.mu), dev(&self.sigma))
    }
}

/// Convergence summary over one or more sweeps with the same scales.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Convergence {
    /// (image, layer, μ or σ) deviation sequences.
    pub aggregates: usize,
    /// Aggregates whose deviation never grows with scale.
    pub monotone: usize,
    pub monotone_fraction: f64,
    /// (image, layer) pairs checked at the two reference scales.
    pub reference_pairs: usize,
    /// Pairs where both μ and σ deviate no more at the larger reference
    /// scale than at the smaller one.
    pub reference_ok: usize,
}

/// Summarizes deviation monotonicity and compares the deviation at scale
/// `large` with that at `small` (both must be among the sweep scales).
pub fn convergence(sweeps: &[SweepResult], small: usize, large: usize) -> Result<Convergence> {
    let mut c = Convergence { aggregates: 0, monotone: 0, monotone_fraction: 0.0, reference_pairs: 0, reference_ok: 0 };
    for s in sweeps {
        let find = |v: usize| {
            s.scales.iter().position(|&x| x == v).ok_or_else(|| Error::Argument(format!("scale {v} not in sweep {:?}", s.scales)))
        };
        let (is, il) = (find(small)?, find(large)?);
        let (dmu, dsig) = s.deviations();
        for l in 0..s.layers.len() {
            for dev in [&dmu, &dsig] {
                c.aggregates += 1;
                if dev.windows(2).all(|p| p[1][l] <= p[0][l]) {
                    c.monotone += 1;
                }
            }
            c.reference_pairs += 1;
            if dmu[il][l] <= dmu[is][l] && dsig[il][l] <= dsig[is][l] {
                c.reference_ok += 1;
            }
        }
    }
    c.monotone_fraction = c.monotone as f64 / c.aggregates.max(1) as f64;
    Ok(c)
}
