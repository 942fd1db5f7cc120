//! Deterministic synthetic images.
//!
//! [`natural_image`] sums octaves of smoothly interpolated lattice noise with
//! amplitude proportional to wavelength (a 1/f spectrum, as in photographs)
//! down to a finest wavelength, below which the image is smooth. Like a real
//! photo it looks busier the more it is downscaled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::{Dims, Tensor};

/// Seeds and size of the images used for statistics sweeps.
pub const SWEEP_SEEDS: [u64; 3] = [11, 23, 37];
pub const SWEEP_SIZE: (usize, usize) = (2048, 2560);

#[inline]
fn smooth(t: f32) -> f32 {
    t * t * (3.0 - 2.0 * t)
}

/// One octave of value noise with lattice spacing `cell`, added into `out`
/// (an `h × w` plane) scaled by `amp`.
fn add_octave(out: &mut [f32], w: usize, h: usize, cell: usize, amp: f32, rng: &mut ChaCha8Rng) {
    let gw = w.div_ceil(cell) + 2;
    let gh = h.div_ceil(cell) + 2;
    let lattice: Vec<f32> = (0..gw * gh).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    // random lattice offset so octaves do not share grid lines
    let ox = rng.gen_range(0..cell);
    let oy = rng.gen_range(0..cell);
    let inv = 1.0 / cell as f32;
    let xw: Vec<(usize, f32)> = (0..w)
        .map(|x| {
            let p = x + ox;
            (p / cell, smooth((p % cell) as f32 * inv))
        })
        .collect();
    for y in 0..h {
        let p = y + oy;
        let (gy, ty) = (p / cell, smooth((p % cell) as f32 * inv));
        let r0 = &lattice[gy * gw..(gy + 1) * gw];
        let r1 = &lattice[(gy + 1) * gw..(gy + 2) * gw];
        let row = &mut out[y * w..(y + 1) * w];
        for (v, &(gx, tx)) in row.iter_mut().zip(&xw) {
            let a = r0[gx] + (r0[gx + 1] - r0[gx]) * tx;
            let b = r1[gx] + (r1[gx + 1] - r1[gx]) * tx;
            *v += amp * (a + (b - a) * ty);
        }
    }
}

/// Single-channel 1/f noise plane, zero mean-ish, wavelengths from the
/// image size down to `finest` pixels.
pub fn noise_plane(w: usize, h: usize, finest: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let mut out = vec![0f32; w * h];
    let mut cell = w.max(h).next_power_of_two();
    let finest = finest.max(1);
    while cell >= finest {
        add_octave(&mut out, w, h, cell, cell as f32, rng);
        cell /= 2;
    }
    out
}

/// RGB image in `[0, 1]` built from three correlated 1/f planes.
pub fn natural_image(w: usize, h: usize, finest: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planes: Vec<Vec<f32>> = (0..3).map(|_| noise_plane(w, h, finest, &mut rng)).collect();
    // luminance-dominated mixing, as in photographs
    let mix = [[0.8, 0.15, 0.05], [0.7, 0.25, 0.05], [0.6, 0.1, 0.3]];
    let mut data = vec![0f32; 3 * w * h];
    for (c, m) in mix.iter().enumerate() {
        let dst = &mut data[c * w * h..(c + 1) * w * h];
        for (i, v) in dst.iter_mut().enumerate() {
            *v = m[0] * planes[0][i] + m[1] * planes[1][i] + m[2] * planes[2][i];
        }
    }
    stretch(&mut data, 0.05, 0.95);
    Tensor::new(Dims::new(1, 3, h, w), data).expect("length matches dims")
}

/// [`natural_image`] compressed towards mid-gray: `0.5 + contrast · (v − 0.5)`.
pub fn low_contrast_image(w: usize, h: usize, finest: usize, contrast: f32, seed: u64) -> Tensor {
    natural_image(w, h, finest, seed).map(|v| 0.5 + contrast * (v - 0.5))
}

/// I.i.d. uniform pixels in `[0, 1)`.
pub fn random_image(dims: Dims, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..dims.len()).map(|_| rng.gen::<f32>()).collect();
    Tensor::new(dims, data).expect("length matches dims")
}

/// Standard normal entries.
pub fn random_normal(dims: Dims, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..dims.len())
        .map(|_| {
            // Box-Muller
            let u: f32 = rng.gen_range(f32::EPSILON..1.0);
            let v: f32 = rng.gen();
            (-2.0 * u.ln()).sqrt() * (std::f32::consts::TAU * v).cos()
        })
        .collect();
    Tensor::new(dims, data).expect("length matches dims")
}

/// The three sweep images (`SWEEP_SIZE`, finest wavelength 16 px).
pub fn sweep_images() -> Vec<Tensor> {
    SWEEP_SEEDS.iter().map(|&s| natural_image(SWEEP_SIZE.0, SWEEP_SIZE.1, 16, s)).collect()
}

/// Affine map of the data's range onto `[lo, hi]`.
fn stretch(data: &mut [f32], lo: f32, hi: f32) {
    let (min, max) = data.iter().fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let scale = if max > min { (hi - lo) / (max - min) } else { 0.0 };
    for v in data.iter_mut() {
        *v = lo + (*v - min) * scale;
    }
}
