//! Independent reference implementations and shared checks.
//!
//! Oracles here are written for clarity: direct index arithmetic, `f64`
//! throughout, no shared code with the kernels under test.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tinstitch_core::network::{zoo, LayerKind, LayerSpec, NamedArray, Network, NetworkGraph, WeightStore};
use tinstitch_core::normstats::{
    channel_stats, instance_norm, instance_whiten, thumbnail_instance_norm, thumbnail_instance_whiten,
    whitening_stats, AffineParams, StatsBank,
};
use tinstitch_core::pipeline::{stylize, PipelineConfig, TensorSink};
use tinstitch_core::synth::random_normal;
use tinstitch_core::tensor::{conv2d, maxpool2, pad, resize_bilinear, ConvWeights, PadMode, PadSpec};
use tinstitch_core::tiler::Rect;
use tinstitch_core::{Dims, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dims: Dims) -> Tensor {
    Tensor::from_fn(dims, |_, _, _, _| rng.gen_range(-1.0f32..1.0))
}

/// `max |a − b| / max(max |b|, 1e-12)`.
pub fn rel_err(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.dims(), b.dims(), "oracle dims differ");
    let scale = b.data().iter().fold(0f64, |m, &v| m.max(v.abs() as f64)).max(1e-12);
    let diff = a.data().iter().zip(b.data()).fold(0f64, |m, (&x, &y)| m.max((x as f64 - y as f64).abs()));
    diff / scale
}

/// Source coordinate for a padded coordinate `i` on an axis of length `n`.
fn mirror(i: i64, n: i64, mode: PadMode) -> Option<i64> {
    if i >= 0 && i < n {
        return Some(i);
    }
    match mode {
        PadMode::Zero => None,
        PadMode::Reflect => Some(if i < 0 { -i } else { 2 * n - 2 - i }),
    }
}

pub fn pad_oracle(x: &Tensor, spec: PadSpec) -> Tensor {
    let d = x.dims();
    let out = Dims::new(d.n, d.c, d.h + spec.top + spec.bottom, d.w + spec.left + spec.right);
    Tensor::from_fn(out, |n, c, y, xx| {
        let sy = mirror(y as i64 - spec.top as i64, d.h as i64, spec.mode);
        let sx = mirror(xx as i64 - spec.left as i64, d.w as i64, spec.mode);
        match (sy, sx) {
            (Some(sy), Some(sx)) => x.get(n, c, sy as usize, sx as usize),
            _ => 0.0,
        }
    })
}

#[allow(clippy::too_many_arguments)]
pub fn conv_oracle(
    x: &Tensor,
    kernel: &[f32],
    bias: &[f32],
    out_c: usize,
    k: usize,
    stride: usize,
    padding: usize,
    mode: PadMode,
) -> Tensor {
    let d = x.dims();
    let ho = (d.h + 2 * padding - k) / stride + 1;
    let wo = (d.w + 2 * padding - k) / stride + 1;
    Tensor::from_fn(Dims::new(d.n, out_c, ho, wo), |n, o, y, xx| {
        let mut acc = bias[o] as f64;
        for ci in 0..d.c {
            for ky in 0..k {
                for kx in 0..k {
                    let iy = (y * stride + ky) as i64 - padding as i64;
                    let ix = (xx * stride + kx) as i64 - padding as i64;
                    if let (Some(sy), Some(sx)) = (mirror(iy, d.h as i64, mode), mirror(ix, d.w as i64, mode)) {
                        let wv = kernel[((o * d.c + ci) * k + ky) * k + kx] as f64;
                        acc += wv * x.get(n, ci, sy as usize, sx as usize) as f64;
                    }
                }
            }
        }
        acc as f32
    })
}

pub fn maxpool_oracle(x: &Tensor) -> Tensor {
    let d = x.dims();
    let out = Dims::new(d.n, d.c, d.h.div_ceil(2), d.w.div_ceil(2));
    Tensor::from_fn(out, |n, c, y, xx| {
        let mut m = f32::NEG_INFINITY;
        for dy in 0..2 {
            for dx in 0..2 {
                let sy = (2 * y + dy).min(d.h - 1);
                let sx = (2 * xx + dx).min(d.w - 1);
                m = m.max(x.get(n, c, sy, sx));
            }
        }
        m
    })
}

pub fn resize_oracle(x: &Tensor, oh: usize, ow: usize) -> Tensor {
    let d = x.dims();
    let coord = |o: usize, out: usize, inp: usize| -> (usize, usize, f64) {
        let s = ((o as f64 + 0.5) * inp as f64 / out as f64 - 0.5).clamp(0.0, (inp - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(inp - 1);
        (i0, i1, s - i0 as f64)
    };
    Tensor::from_fn(Dims::new(d.n, d.c, oh, ow), |n, c, y, xx| {
        let (y0, y1, fy) = coord(y, oh, d.h);
        let (x0, x1, fx) = coord(xx, ow, d.w);
        let g = |yy, xq| x.get(n, c, yy, xq) as f64;
        let top = g(y0, x0) * (1.0 - fx) + g(y0, x1) * fx;
        let bot = g(y1, x0) * (1.0 - fx) + g(y1, x1) * fx;
        (top * (1.0 - fy) + bot * fy) as f32
    })
}

/// Welford mean and population variance of one plane.
pub fn welford(values: &[f32]) -> (f64, f64) {
    let (mut mean, mut m2) = (0f64, 0f64);
    for (i, &v) in values.iter().enumerate() {
        let v = v as f64;
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    (mean, m2 / values.len() as f64)
}

pub const SHAPE_COUNT: usize = 50;

/// Max relative error of `conv2d` against the oracle over random shapes.
pub fn conv_sweep(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0f64;
    for _ in 0..SHAPE_COUNT {
        let (n, ci, co) = (r.gen_range(1..=2), r.gen_range(1..=4), r.gen_range(1..=4));
        let (h, w) = (r.gen_range(5..=17), r.gen_range(5..=17));
        let k = [1, 2, 3, 5][r.gen_range(0..4)];
        let stride = r.gen_range(1..=3);
        let mode = if r.gen() { PadMode::Reflect } else { PadMode::Zero };
        let max_pad = (k / 2).min(h - 1).min(w - 1);
        let padding = r.gen_range(0..=max_pad);
        let x = random_tensor(&mut r, Dims::new(n, ci, h, w));
        let kernel: Vec<f32> = (0..co * ci * k * k).map(|_| r.gen_range(-1.0..1.0)).collect();
        let bias: Vec<f32> = (0..co).map(|_| r.gen_range(-1.0..1.0)).collect();
        let wts = ConvWeights::new(co, ci, k, k, kernel.clone(), bias.clone()).unwrap();
        let got = conv2d(&x, &wts, stride, PadSpec::uniform(mode, padding)).unwrap();
        let want = conv_oracle(&x, &kernel, &bias, co, k, stride, padding, mode);
        worst = worst.max(rel_err(&got, &want));
    }
    worst
}

pub fn pool_sweep(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0f64;
    for _ in 0..SHAPE_COUNT {
        let d = Dims::new(r.gen_range(1..=2), r.gen_range(1..=4), r.gen_range(1..=19), r.gen_range(1..=19));
        let x = random_tensor(&mut r, d);
        worst = worst.max(rel_err(&maxpool2(&x), &maxpool_oracle(&x)));
    }
    worst
}

pub fn resize_sweep(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0f64;
    for _ in 0..SHAPE_COUNT {
        let d = Dims::new(r.gen_range(1..=2), r.gen_range(1..=3), r.gen_range(1..=24), r.gen_range(1..=24));
        let (oh, ow) = (r.gen_range(1..=40), r.gen_range(1..=40));
        let x = random_tensor(&mut r, d);
        worst = worst.max(rel_err(&resize_bilinear(&x, oh, ow).unwrap(), &resize_oracle(&x, oh, ow)));
    }
    worst
}

pub fn pad_sweep(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0f64;
    for _ in 0..SHAPE_COUNT {
        let d = Dims::new(r.gen_range(1..=2), r.gen_range(1..=3), r.gen_range(2..=12), r.gen_range(2..=12));
        let mode = if r.gen() { PadMode::Reflect } else { PadMode::Zero };
        let lim = |n: usize| if mode == PadMode::Reflect { n - 1 } else { 4 };
        let spec = PadSpec {
            mode,
            left: r.gen_range(0..=lim(d.w)),
            right: r.gen_range(0..=lim(d.w)),
            top: r.gen_range(0..=lim(d.h)),
            bottom: r.gen_range(0..=lim(d.h)),
        };
        let x = random_tensor(&mut r, d);
        worst = worst.max(rel_err(&pad(&x, spec).unwrap(), &pad_oracle(&x, spec)));
    }
    worst
}

pub fn random_store(r: &mut ChaCha8Rng) -> WeightStore {
    let mut s = WeightStore::new();
    for i in 0..r.gen_range(0..6) {
        let dims: Vec<usize> = (0..r.gen_range(0..=4)).map(|_| r.gen_range(1..=5)).collect();
        let len = dims.iter().product();
        let data = (0..len).map(|_| r.gen_range(-1e3f32..1e3)).collect();
        s.insert(format!("layer{i}.{}", ["weight", "bias", "gamma"][i % 3]), NamedArray::new(dims, data).unwrap())
            .unwrap();
    }
    s
}

/// Whether `count` random weight stores survive encode/decode byte for byte.
pub fn weight_roundtrip(seed: u64, count: usize) -> bool {
    let mut r = rng(seed);
    (0..count).all(|_| {
        let s = random_store(&mut r);
        let bytes = s.to_bytes();
        let back = WeightStore::from_bytes(&bytes).unwrap();
        back == s && back.to_bytes() == bytes && bytes.len() == s.encoded_len()
    })
}

/// Random graph whose output has the input's resolution: every pool is
/// eventually matched by a ×2 upsample, and explicit padding is followed by
/// an unpadded conv that consumes it.
pub fn random_scale_preserving_graph(r: &mut ChaCha8Rng, channels: usize) -> NetworkGraph {
    let mut layers = Vec::new();
    let mut open_pools = 0usize;
    let mut pools_left = 2usize;
    let steps = r.gen_range(2..=7);
    let conv = |k: usize, pad: usize, mode: PadMode| {
        LayerSpec::new(LayerKind::Conv {
            in_channels: channels,
            out_channels: channels,
            kernel: k,
            stride: 1,
            pad,
            pad_mode: mode,
        })
    };
    for _ in 0..steps {
        let mode = if r.gen() { PadMode::Reflect } else { PadMode::Zero };
        match r.gen_range(0..6) {
            0 | 1 => {
                let k = [1, 3, 5][r.gen_range(0..3)];
                layers.push(conv(k, k / 2, mode));
            }
            2 => layers.push(LayerSpec::relu()),
            3 if pools_left > 0 => {
                layers.push(LayerSpec::new(LayerKind::Maxpool2));
                open_pools += 1;
                pools_left -= 1;
            }
            4 if open_pools > 0 => {
                layers.push(LayerSpec::new(LayerKind::UpsampleNearest { factor: 2 }));
                open_pools -= 1;
            }
            _ => {
                let a = r.gen_range(1..=2);
                let kind = if mode == PadMode::Reflect {
                    LayerKind::PadReflect { amount: a }
                } else {
                    LayerKind::PadZero { amount: a }
                };
                layers.push(LayerSpec::new(kind));
                layers.push(conv(2 * a + 1, 0, mode));
            }
        }
    }
    for _ in 0..open_pools {
        layers.push(LayerSpec::new(LayerKind::UpsampleNearest { factor: 2 }));
    }
    layers.push(conv(3, 1, PadMode::Reflect));
    for (i, l) in layers.iter_mut().enumerate() {
        if matches!(l.kind, LayerKind::Conv { .. }) {
            l.weight = Some(format!("c{i}"));
        }
    }
    NetworkGraph::new(channels, layers).unwrap()
}

/// Strictly positive weights so any input change reaches every dependent
/// output.
pub fn positive_weights(g: &NetworkGraph, r: &mut ChaCha8Rng) -> WeightStore {
    let mut s = WeightStore::new();
    for l in &g.layers {
        if let LayerKind::Conv { in_channels, out_channels, kernel, .. } = l.kind {
            let p = l.weight.clone().unwrap();
            let n = out_channels * in_channels * kernel * kernel;
            let k = (0..n).map(|_| r.gen_range(0.1f32..1.0)).collect();
            s.insert(format!("{p}.weight"), NamedArray::new(vec![out_channels, in_channels, kernel, kernel], k).unwrap())
                .unwrap();
            s.insert(format!("{p}.bias"), NamedArray::new(vec![out_channels], vec![0.1; out_channels]).unwrap())
                .unwrap();
        }
    }
    s
}

/// Largest Chebyshev distance between a perturbed input pixel and an output
/// pixel that changed, over an 8×8 block of probe positions in the middle of
/// a 64×64 input (covering every residue class of up to two 2× pools).
pub fn probe_receptive_field(g: &NetworkGraph, w: &WeightStore, r: &mut ChaCha8Rng) -> usize {
    let net = Network::new(g.clone(), w).unwrap();
    let d = Dims::new(1, g.input_channels, 64, 64);
    let base = Tensor::from_fn(d, |_, _, _, _| r.gen_range(0.0f32..1.0));
    let mut bank = StatsBank::new();
    let y0 = net.forward(&base, &mut bank).unwrap();
    assert_eq!(y0.dims().with_channels(d.c), d, "graph is not scale preserving");
    let mut reach = 0usize;
    for py in 28..36 {
        for px in 28..36 {
            let mut x = base.clone();
            for c in 0..d.c {
                x.set(0, c, py, px, x.get(0, c, py, px) + 100.0);
            }
            let y = net.forward(&x, &mut StatsBank::new()).unwrap();
            let od = y.dims();
            for c in 0..od.c {
                for yy in 0..od.h {
                    for xx in 0..od.w {
                        if y.get(0, c, yy, xx) != y0.get(0, c, yy, xx) {
                            reach = reach.max(yy.abs_diff(py)).max(xx.abs_diff(px));
                        }
                    }
                }
            }
        }
    }
    reach
}

/// Guillotine partition of an `h × w` plane into `parts` rectangles.
pub fn random_partition(r: &mut ChaCha8Rng, h: usize, w: usize, parts: usize) -> Vec<Rect> {
    let mut rects = vec![Rect::new(0, 0, w, h)];
    while rects.len() < parts {
        let splittable: Vec<usize> = (0..rects.len()).filter(|&i| rects[i].w > 1 || rects[i].h > 1).collect();
        let i = splittable[r.gen_range(0..splittable.len())];
        let rc = rects[i];
        let vertical = if rc.w > 1 && rc.h > 1 { r.gen() } else { rc.w > 1 };
        let (a, b) = if vertical {
            let cut = r.gen_range(1..rc.w);
            (Rect::new(rc.x, rc.y, cut, rc.h), Rect::new(rc.x + cut, rc.y, rc.w - cut, rc.h))
        } else {
            let cut = r.gen_range(1..rc.h);
            (Rect::new(rc.x, rc.y, rc.w, cut), Rect::new(rc.x, rc.y + cut, rc.w, rc.h - cut))
        };
        rects[i] = a;
        rects.push(b);
    }
    rects
}

/// Max abs difference between whole-tensor IN and piecewise TIN with
/// whole-tensor statistics, over `count` random tensors and partitions.
pub fn tin_partition(seed: u64, count: usize) -> f32 {
    let mut r = rng(seed);
    let mut worst = 0f32;
    for _ in 0..count {
        let d = Dims::new(r.gen_range(1..=2), r.gen_range(1..=4), r.gen_range(2..=24), r.gen_range(2..=24));
        let x = random_tensor(&mut r, d);
        let gamma = (0..d.c).map(|_| r.gen_range(0.5..2.0)).collect();
        let beta = (0..d.c).map(|_| r.gen_range(-1.0..1.0)).collect();
        let affine = AffineParams::new(gamma, beta).unwrap();
        let whole = instance_norm(&x, &affine, tinstitch_core::normstats::EPS).unwrap();
        let stats = channel_stats(&x, tinstitch_core::normstats::EPS).unwrap();
        let mut out = Tensor::zeros(d);
        let parts = r.gen_range(2..=5);
        for rc in random_partition(&mut r, d.h, d.w, parts) {
            let piece = x.crop(rc.x, rc.y, rc.w, rc.h).unwrap();
            let y = thumbnail_instance_norm(&piece, &stats, &affine).unwrap();
            out.paste(y.view(), rc.x, rc.y).unwrap();
        }
        worst = worst.max(out.max_abs_diff(&whole));
    }
    worst
}

/// Same protocol for whitening. Also returns the largest deviation of the
/// whitened whole tensor's covariance from identity.
pub fn tiw_partition(seed: u64, count: usize) -> (f32, f64) {
    let mut r = rng(seed);
    let mut worst = 0f32;
    let mut cov_dev = 0f64;
    for i in 0..count {
        let c = r.gen_range(1..=4);
        let d = Dims::new(r.gen_range(1..=2), c, r.gen_range(6..=24), r.gen_range(6..=24));
        // correlated channels: mix independent normals
        let z = random_normal(d, seed.wrapping_mul(1000) + i as u64);
        let mix: Vec<f32> = (0..c * c).map(|_| r.gen_range(-1.0..1.0)).collect();
        let x = Tensor::from_fn(d, |n, o, y, xx| {
            (0..c).map(|k| (mix[o * c + k] + if k == o { 1.5 } else { 0.0 }) * z.get(n, k, y, xx)).sum::<f32>() + o as f32
        });
        let eps = tinstitch_core::normstats::EPS;
        let whole = instance_whiten(&x, eps).unwrap();
        let stats = whitening_stats(&x, eps).unwrap();
        let mut out = Tensor::zeros(d);
        let parts = r.gen_range(2..=5);
        for rc in random_partition(&mut r, d.h, d.w, parts) {
            let piece = x.crop(rc.x, rc.y, rc.w, rc.h).unwrap();
            let y = thumbnail_instance_whiten(&piece, &stats).unwrap();
            out.paste(y.view(), rc.x, rc.y).unwrap();
        }
        worst = worst.max(out.max_abs_diff(&whole));
        cov_dev = cov_dev.max(identity_deviation(&whole));
    }
    (worst, cov_dev)
}

/// Max |Cov(y) − I| entry over batch items, population covariance.
pub fn identity_deviation(y: &Tensor) -> f64 {
    let d = y.dims();
    let hw = d.plane() as f64;
    let mut worst = 0f64;
    for n in 0..d.n {
        let means: Vec<f64> = (0..d.c).map(|c| y.plane(n, c).iter().map(|&v| v as f64).sum::<f64>() / hw).collect();
        for i in 0..d.c {
            for j in 0..d.c {
                let cov: f64 = y
                    .plane(n, i)
                    .iter()
                    .zip(y.plane(n, j))
                    .map(|(&a, &b)| (a as f64 - means[i]) * (b as f64 - means[j]))
                    .sum::<f64>()
                    / hw;
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((cov - target).abs());
            }
        }
    }
    worst
}

/// Whole-image toy output versus tiled output with whole-image statistics.
pub fn seam_difference(size: usize, k: usize, s: usize, seed: u64) -> f32 {
    let (g, w) = zoo::toy_network();
    let net = Network::new(g, &w).unwrap();
    let img = tinstitch_core::synth::random_image(Dims::new(1, 3, size, size), seed);
    let whole = net.forward(&img, &mut StatsBank::new()).unwrap();
    let cfg = PipelineConfig { patch_size: k, stride: s, thumb_short_side: size, ..Default::default() };
    let mut sink = TensorSink::new();
    stylize(&net, &img, None, &cfg, &mut sink).unwrap();
    sink.into_tensor().unwrap().max_abs_diff(&whole)
}

/// Peak bytes allocated while stylizing a `size × size` natural image into
/// a preallocated tensor sink. Only meaningful with the counting allocator
/// installed.
pub fn stylize_peak(net: &Network, cfg: &PipelineConfig, size: usize) -> usize {
    let img = tinstitch_core::synth::natural_image(size, size, 8, size as u64);
    let out_c = net.graph().output_channels();
    let mut sink = TensorSink::with_dims(Dims::new(1, out_c, size, size));
    let (r, peak) = tinstitch_core::alloc::measure(|| stylize(net, &img, None, cfg, &mut sink));
    r.unwrap();
    peak
}

/// Full network outputs for every window of `img`. With `bank` the windows
/// run on those frozen statistics; without, each window uses its own.
pub fn window_outputs(net: &Network, img: &Tensor, bank: Option<&StatsBank>, k: usize, s: usize) -> Vec<Tensor> {
    let d = img.dims();
    let plan = tinstitch_core::tiler::plan_tiles(d.w, d.h, k, s).unwrap();
    plan.windows
        .iter()
        .map(|&w| {
            let p = tinstitch_core::tiler::extract_patch(img, w).unwrap();
            match bank {
                Some(b) => net.forward_frozen(&p, b).unwrap(),
                None => net.forward(&p, &mut StatsBank::new()).unwrap(),
            }
        })
        .collect()
}

/// Gram consistency of plain-IN patch outputs over TIN patch outputs of the
/// toy network on a 256² natural image (K=96, S=64, whole-image thumbnail),
/// measured on reference-encoder features at `probe`.
pub fn gram_ratio(seed: u64, probe: &str) -> f64 {
    use tinstitch_core::metrics::{gram_consistency, FeatureExtractor};
    use tinstitch_core::network::NormVariant;
    let (g, w) = zoo::toy_network();
    let tin = Network::new(g.clone(), &w).unwrap();
    let plain = Network::new(g.with_norm_variant(NormVariant::Tin, NormVariant::In), &w).unwrap();
    let eg = zoo::reference_encoder(8);
    let fx = FeatureExtractor::new(&eg, &zoo::init_weights(&eg, 7), probe).unwrap();
    let img = tinstitch_core::synth::natural_image(256, 256, 8, seed);
    let mut bank = StatsBank::new();
    tin.forward(&img, &mut bank).unwrap();
    let bank = bank.frozen();
    let a = window_outputs(&tin, &img, Some(&bank), 96, 64);
    let b = window_outputs(&plain, &img, None, 96, 64);
    gram_consistency(&b, &fx).unwrap() / gram_consistency(&a, &fx).unwrap()
}

/// `Σ (a − b)² / count` over two feature tensors, summed in index order.
pub fn mse_oracle(a: &Tensor, b: &Tensor) -> f64 {
    let d = a.dims();
    let mut sum = 0f64;
    for n in 0..d.n {
        for c in 0..d.c {
            for y in 0..d.h {
                for x in 0..d.w {
                    sum += (a.get(n, c, y, x) as f64 - b.get(n, c, y, x) as f64).powi(2);
                }
            }
        }
    }
    sum / d.len() as f64
}
