//! Per-image occlusion masks.
//!
//! Occluder points are projected into a camera, dilated with a large disc to
//! close the gaps between scattered samples, eroded with a smaller disc to
//! pull the contour back, and feathered into blending weights.
//!
//! Structuring elements are exact lattice discs
//! `D_r = {(dx, dy) ∈ ℤ² : dx² + dy² <= r²}`. Both operators decompose the
//! disc into one horizontal run per row offset and evaluate runs with prefix
//! sums, which is exact and costs `O(width · height · (2r + 1))`.

use crate::geometry::PinholeCamera;
use crate::ingest::{GrayImage, PipelineConfig};
use crate::occlusion::OccluderSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: u32,
    pub height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.bits[y as usize * width as usize + x as usize] = f(x, y);
            }
        }
        m
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn union(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    /// 0 for clear, 255 for set.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }

    /// Non-zero pixels are set.
    pub fn from_gray(img: &GrayImage) -> Self {
        Self {
            width: img.width,
            height: img.height,
            bits: img.data.iter().map(|&v| v != 0).collect(),
        }
    }

    fn row(&self, y: usize) -> &[bool] {
        let w = self.width as usize;
        &self.bits[y * w..(y + 1) * w]
    }
}

/// Per-pixel occlusion weight in `[0, 1]`, 1 meaning fully occluded.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask {
    pub width: u32,
    pub height: u32,
    weights: Vec<f64>,
}

impl SoftMask {
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.weights[y as usize * self.width as usize + x as usize]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights scaled to 0..=255, rounded half up.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.weights.iter().map(|&w| (w * 255.0 + 0.5).floor() as u8).collect(),
        }
    }
}

/// Sets the pixel nearest to each in-frame, in-front projection.
pub fn rasterize_points(cam: &PinholeCamera, occ: &OccluderSet) -> BinaryMask {
    let mut mask = BinaryMask::new(cam.width, cam.height);
    for p in &occ.points {
        let Some((u, v)) = cam.project(p.position) else {
            continue;
        };
        if !cam.contains(u, v) {
            continue;
        }
        if let Some((x, y)) = cam.pixel_of(u, v) {
            mask.set(x, y, true);
        }
    }
    mask
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Half-width of the disc run at each row offset `dy = -r..=r`.
pub fn disc_half_widths(r: u32) -> Vec<usize> {
    let r = r as i64;
    (-r..=r)
        .map(|dy| isqrt((r * r - dy * dy) as u64) as usize)
        .collect()
}

/// Number of lattice points in `D_r`.
pub fn disc_area(r: u32) -> usize {
    disc_half_widths(r).iter().map(|w| 2 * w + 1).sum()
}

fn prefix_counts(row: &[bool]) -> Vec<u32> {
    let mut out = Vec::with_capacity(row.len() + 1);
    let mut acc = 0;
    out.push(0);
    for &b in row {
        acc += b as u32;
        out.push(acc);
    }
    out
}

pub fn disc_dilate(mask: &BinaryMask, r: u32) -> BinaryMask {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let halves = disc_half_widths(r);
    let prefixes: Vec<Vec<u32>> = (0..h).map(|y| prefix_counts(mask.row(y))).collect();
    let ri = r as i64;
    let mut out = BinaryMask::new(mask.width, mask.height);
    for y in 0..h {
        for (k, &half) in halves.iter().enumerate() {
            let sy = y as i64 + k as i64 - ri;
            if sy < 0 || sy >= h as i64 {
                continue;
            }
            let pre = &prefixes[sy as usize];
            if pre[w] == 0 {
                continue;
            }
            let dst = &mut out.bits[y * w..(y + 1) * w];
            for (x, cell) in dst.iter_mut().enumerate() {
                if *cell {
                    continue;
                }
                let lo = x.saturating_sub(half);
                let hi = (x + half + 1).min(w);
                if pre[hi] > pre[lo] {
                    *cell = true;
                }
            }
        }
    }
    out
}

/// Pixels outside the image count as unset.
pub fn disc_erode(mask: &BinaryMask, r: u32) -> BinaryMask {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let halves = disc_half_widths(r);
    let prefixes: Vec<Vec<u32>> = (0..h).map(|y| prefix_counts(mask.row(y))).collect();
    let ri = r as usize;
    let mut out = BinaryMask::new(mask.width, mask.height);
    if w < 2 * ri + 1 || h < 2 * ri + 1 {
        return out;
    }
    for y in ri..h - ri {
        for x in ri..w - ri {
            let inside = halves.iter().enumerate().all(|(k, &half)| {
                let pre = &prefixes[y + k - ri];
                pre[x + half + 1] - pre[x - half] == (2 * half + 1) as u32
            });
            if inside {
                out.bits[y * w + x] = true;
            }
        }
    }
    out
}

/// Chebyshev distance from each pixel to the nearest unset pixel of the
/// image; 0 on unset pixels, `u32::MAX` when the mask has no unset pixel.
pub fn chebyshev_distance_to_clear(mask: &BinaryMask) -> Vec<u32> {
    let (w, h) = (mask.width as usize, mask.height as usize);
    const INF: u32 = u32::MAX;
    let mut dist: Vec<u32> = mask.bits.iter().map(|&b| if b { INF } else { 0 }).collect();
    let relax = |d: &mut Vec<u32>, i: usize, j: usize| {
        let cand = d[j].saturating_add(1);
        if cand < d[i] {
            d[i] = cand;
        }
    };
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x > 0 {
                relax(&mut dist, i, i - 1);
            }
            if y > 0 {
                relax(&mut dist, i, i - w);
                if x > 0 {
                    relax(&mut dist, i, i - w - 1);
                }
                if x + 1 < w {
                    relax(&mut dist, i, i - w + 1);
                }
            }
        }
    }
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let i = y * w + x;
            if x + 1 < w {
                relax(&mut dist, i, i + 1);
            }
            if y + 1 < h {
                relax(&mut dist, i, i + w);
                if x + 1 < w {
                    relax(&mut dist, i, i + w + 1);
                }
                if x > 0 {
                    relax(&mut dist, i, i + w - 1);
                }
            }
        }
    }
    dist
}

/// Linear ramp over the `w` outermost pixel rings of every blob.
pub fn feather_contours(mask: &BinaryMask, w: u32) -> SoftMask {
    let dist = chebyshev_distance_to_clear(mask);
    let weights = dist
        .iter()
        .map(|&d| {
            if d == 0 {
                0.0
            } else if d > w {
                1.0
            } else {
                d as f64 / w as f64
            }
        })
        .collect();
    SoftMask {
        width: mask.width,
        height: mask.height,
        weights,
    }
}

/// Copy of `mask` with `pad` unset pixels added on every side.
pub fn pad(mask: &BinaryMask, pad: u32) -> BinaryMask {
    BinaryMask::from_fn(mask.width + 2 * pad, mask.height + 2 * pad, |x, y| {
        x >= pad && y >= pad && x < mask.width + pad && y < mask.height + pad && mask.get(x - pad, y - pad)
    })
}

/// The `width` x `height` window of `mask` starting at `(x0, y0)`.
pub fn crop(mask: &BinaryMask, x0: u32, y0: u32, width: u32, height: u32) -> BinaryMask {
    BinaryMask::from_fn(width, height, |x, y| mask.get(x + x0, y + y0))
}

/// Dilation by `r_dilate` followed by erosion by `r_erode`, computed on a
/// canvas extended by `r_dilate` so that discs cut by the image border are
/// not eroded away, then cropped back to the image.
pub fn dilate_then_erode(seeds: &BinaryMask, r_dilate: u32, r_erode: u32) -> BinaryMask {
    let grown = disc_erode(&disc_dilate(&pad(seeds, r_dilate), r_dilate), r_erode);
    crop(&grown, r_dilate, r_dilate, seeds.width, seeds.height)
}

/// Hard and feathered masks of one facade's occluders in one camera.
pub fn occlusion_masks(
    cam: &PinholeCamera,
    occ: &OccluderSet,
    cfg: &PipelineConfig,
) -> (BinaryMask, SoftMask) {
    let seeds = rasterize_points(cam, occ);
    let hard = if seeds.is_empty() {
        seeds
    } else {
        dilate_then_erode(&seeds, cfg.dilate_r, cfg.erode_r)
    };
    let soft = feather_contours(&hard, cfg.feather_w);
    (hard, soft)
}
