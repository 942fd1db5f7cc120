//! Sliding-window tiling and overlap-discarding reassembly.
//!
//! Windows of `patch_size` pixels are placed every `stride` pixels along each
//! axis; the last window on an axis is pulled back so it ends exactly at the
//! image edge. Each window *owns* the part of itself that lies closer to its
//! own grid cell than to its neighbour's: the boundary between two
//! neighbours sits at the midpoint of their overlap (rounded down). Owned
//! rectangles partition the image; everything else a window computes is halo
//! and is thrown away on assembly.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Result};
use crate::tensor::{Tensor, TensorRef};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Rect { x, y, w, h }
    }

    pub const fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn contains(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.x + other.w <= self.x + self.w
            && other.y + other.h <= self.y + self.h
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.x + other.w
            && other.x < self.x + self.w
            && self.y < other.y + other.h
            && other.y < self.y + self.h
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilePlan {
    pub width: usize,
    pub height: usize,
    pub patch_size: usize,
    pub stride: usize,
    pub cols: usize,
    pub rows: usize,
    /// Source rectangles, row-major.
    pub windows: Vec<Rect>,
    /// Region of the output each window contributes, same order.
    pub ownership: Vec<Rect>,
}

/// One axis: window starts, window length, owned spans `[start, end)`.
struct AxisPlan {
    starts: Vec<usize>,
    len: usize,
    owned: Vec<(usize, usize)>,
}

fn plan_axis(extent: usize, k: usize, s: usize) -> AxisPlan {
    if extent <= k {
        return AxisPlan { starts: vec![0], len: extent, owned: vec![(0, extent)] };
    }
    let mut starts = vec![0];
    let mut p = 0;
    while p + k < extent {
        p += s;
        if p + k > extent {
            p = extent - k;
        }
        starts.push(p);
    }
    let mut owned = Vec::with_capacity(starts.len());
    let mut begin = 0;
    for pair in starts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let overlap = a + k - b;
        let boundary = b + overlap / 2;
        owned.push((begin, boundary));
        begin = boundary;
    }
    owned.push((begin, extent));
    AxisPlan { starts, len: k, owned }
}

/// Sliding-window plan for a `width × height` image.
pub fn plan_tiles(width: usize, height: usize, patch_size: usize, stride: usize) -> Result<TilePlan> {
    if stride == 0 || patch_size <= stride {
        return Err(config_err!(
            "patch size {patch_size} must exceed stride {stride} >= 1 so neighbouring windows overlap"
        ));
    }
    if width == 0 || height == 0 {
        return Err(shape_err!("cannot tile an empty {width}x{height} image"));
    }
    let xs = plan_axis(width, patch_size, stride);
    let ys = plan_axis(height, patch_size, stride);
    let mut windows = Vec::with_capacity(xs.starts.len() * ys.starts.len());
    let mut ownership = Vec::with_capacity(windows.capacity());
    for (&y0, &(oy0, oy1)) in ys.starts.iter().zip(&ys.owned) {
        for (&x0, &(ox0, ox1)) in xs.starts.iter().zip(&xs.owned) {
            windows.push(Rect::new(x0, y0, xs.len, ys.len));
            ownership.push(Rect::new(ox0, oy0, ox1 - ox0, oy1 - oy0));
        }
    }
    Ok(TilePlan {
        width,
        height,
        patch_size,
        stride,
        cols: xs.starts.len(),
        rows: ys.starts.len(),
        windows,
        ownership,
    })
}

impl TilePlan {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Halo width discarded on each interior side, `(left/top, right/bottom)`.
    pub fn margins(&self) -> (usize, usize) {
        let overlap = self.patch_size - self.stride;
        (overlap / 2, overlap.div_ceil(2))
    }

    /// The owned rectangle of window `i` in window-local coordinates.
    pub fn local_ownership(&self, i: usize) -> Rect {
        let (w, o) = (self.windows[i], self.ownership[i]);
        Rect::new(o.x - w.x, o.y - w.y, o.w, o.h)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

pub fn extract_patch(image: &Tensor, window: Rect) -> Result<Tensor> {
    image.crop(window.x, window.y, window.w, window.h)
}

/// Copies the owned region of `patch` (the network output for window `i`)
/// into `out`, which holds the full image.
pub fn place_patch(out: &mut Tensor, plan: &TilePlan, i: usize, patch: TensorRef<'_>) -> Result<()> {
    let win = plan.windows[i];
    let d = patch.dims();
    if d.h != win.h || d.w != win.w {
        return Err(shape_err!("patch {i} is {}x{}, window is {}x{}", d.h, d.w, win.h, win.w));
    }
    let own = plan.ownership[i];
    copy_region(patch, plan.local_ownership(i), out, own.x, own.y)
}

/// Copies `src_rect` of every plane of `src` into `dst` at `(dx, dy)`.
pub(crate) fn copy_region(src: TensorRef<'_>, src_rect: Rect, dst: &mut Tensor, dx: usize, dy: usize) -> Result<()> {
    let (d, od) = (src.dims(), dst.dims());
    if od.n != d.n || od.c != d.c {
        return Err(shape_err!("cannot copy from {d} into {od}"));
    }
    if src_rect.x + src_rect.w > d.w || src_rect.y + src_rect.h > d.h || dx + src_rect.w > od.w || dy + src_rect.h > od.h {
        return Err(shape_err!("region {src_rect:?} -> ({dx},{dy}) out of bounds for {d} -> {od}"));
    }
    for n in 0..d.n {
        for c in 0..d.c {
            let s_plane = src.plane(n, c);
            let t_plane = dst.plane_mut(n, c);
            for row in 0..src_rect.h {
                let s = (src_rect.y + row) * d.w + src_rect.x;
                let t = (dy + row) * od.w + dx;
                t_plane[t..t + src_rect.w].copy_from_slice(&s_plane[s..s + src_rect.w]);
            }
        }
    }
    Ok(())
}

/// Reassembles per-window outputs (indexed like `plan.windows`) into the full
/// image, keeping only each window's owned region. No blending.
pub fn assemble(patches: &[Tensor], plan: &TilePlan) -> Result<Tensor> {
    if patches.len() != plan.len() {
        return Err(shape_err!("{} patches for a {}-window plan", patches.len(), plan.len()));
    }
    let first = patches[0].dims();
    let mut out = Tensor::zeros(first.with_spatial(plan.height, plan.width));
    for (i, p) in patches.iter().enumerate() {
        place_patch(&mut out, plan, i, p.view())?;
    }
    Ok(out)
}
