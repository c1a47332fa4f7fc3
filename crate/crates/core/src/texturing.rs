//! Facade ortho-rectification and mosaicking.
//!
//! Textures live on a grid attached to the facade plane: columns run along
//! `e1 -> e2` starting at `s = 0`, rows run from `z_top` (row 0) down to
//! `z_bottom`, and pixel centers sit at half steps of the ground sample
//! distance.

use crate::error::{Error, Result};
use crate::geometry::{FacadeQuad, PinholeCamera, Point2, Point3, MIN_DEPTH};
use crate::ingest::RgbImage;
use crate::masking::{BinaryMask, SoftMask};

/// Pixel layout of a facade texture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthoGrid {
    pub e1: Point2,
    pub direction: Point2,
    pub z_bottom: f64,
    pub gsd: f64,
    pub cols: u32,
    pub rows: u32,
    pub length: f64,
    pub z_top: f64,
}

impl OrthoGrid {
    pub fn for_quad(quad: &FacadeQuad, gsd: f64) -> Result<Self> {
        if !(gsd.is_finite() && gsd > 0.0) {
            return Err(Error::InvalidInput(format!("ortho gsd must be > 0, got {gsd}")));
        }
        let cells = |extent: f64| ((extent / gsd - 1e-9).ceil().max(1.0)) as u32;
        Ok(Self {
            e1: quad.e1,
            direction: quad.direction(),
            z_bottom: quad.z_bottom,
            gsd,
            cols: cells(quad.length()),
            rows: cells(quad.height()),
            length: quad.length(),
            z_top: quad.z_top,
        })
    }

    pub fn len(&self) -> usize {
        self.cols as usize * self.rows as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(s, z)` of the center of pixel `(col, row)`.
    pub fn pixel_center(&self, col: u32, row: u32) -> (f64, f64) {
        let s = (col as f64 + 0.5) * self.gsd;
        let z = self.z_bottom + ((self.rows - 1 - row) as f64 + 0.5) * self.gsd;
        (s, z)
    }

    pub fn world_point(&self, col: u32, row: u32) -> Point3 {
        let (s, z) = self.pixel_center(col, row);
        (self.e1 + self.direction * s).with_z(z)
    }

    /// Same pixel layout (within floating-point noise).
    pub fn same_layout(&self, other: &OrthoGrid) -> bool {
        self.cols == other.cols
            && self.rows == other.rows
            && (self.gsd - other.gsd).abs() < 1e-12
            && self.e1.distance(other.e1) < 1e-9
            && (self.z_bottom - other.z_bottom).abs() < 1e-9
    }
}

/// A camera retained for a facade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewScore {
    /// Index into the camera list.
    pub camera: usize,
    /// Fraction of the image covered by the projected facade.
    pub coverage: f64,
    /// Obliquity over distance, larger is better.
    pub score: f64,
}

/// Clips a polygon against the rectangle `[0, w] x [0, h]`.
fn clip_to_rect(poly: &[(f64, f64)], w: f64, h: f64) -> Vec<(f64, f64)> {
    type Edge = (fn((f64, f64), f64) -> f64, f64);
    // signed "inside" measure per clipping edge; >= 0 is inside
    let edges: [Edge; 4] = [
        (|p, _| p.0, 0.0),
        (|p, lim| lim - p.0, w),
        (|p, _| p.1, 0.0),
        (|p, lim| lim - p.1, h),
    ];
    let mut out = poly.to_vec();
    for (inside, lim) in edges {
        if out.is_empty() {
            break;
        }
        let input = std::mem::take(&mut out);
        for i in 0..input.len() {
            let cur = input[i];
            let prev = input[(i + input.len() - 1) % input.len()];
            let (dc, dp) = (inside(cur, lim), inside(prev, lim));
            if dc >= 0.0 {
                if dp < 0.0 {
                    let t = dp / (dp - dc);
                    out.push((prev.0 + t * (cur.0 - prev.0), prev.1 + t * (cur.1 - prev.1)));
                }
                out.push(cur);
            } else if dp >= 0.0 {
                let t = dp / (dp - dc);
                out.push((prev.0 + t * (cur.0 - prev.0), prev.1 + t * (cur.1 - prev.1)));
            }
        }
    }
    out
}

fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        .abs()
        * 0.5
}

/// Fraction of the image covered by the projected quad, `None` when a
/// corner is at or behind the camera.
pub fn projected_coverage(cam: &PinholeCamera, quad: &FacadeQuad) -> Option<f64> {
    let corners: Option<Vec<(f64, f64)>> = quad.vertices().iter().map(|&v| cam.project(v)).collect();
    let clipped = clip_to_rect(&corners?, cam.width as f64, cam.height as f64);
    let area = if clipped.len() >= 3 { polygon_area(&clipped) } else { 0.0 };
    Some(area / (cam.width as f64 * cam.height as f64))
}

/// Cameras seeing enough of the facade, in camera order.
///
/// A camera is kept when every corner is in front of it, the projected quad
/// covers at least `view_min_frac` of the image, and the camera lies on the
/// street side of the facade plane.
pub fn select_views(cameras: &[PinholeCamera], quad: &FacadeQuad, view_min_frac: f64) -> Vec<ViewScore> {
    let centroid = quad.centroid();
    let normal = Point3::new(quad.plane.nx, quad.plane.ny, 0.0);
    cameras
        .iter()
        .enumerate()
        .filter_map(|(camera, cam)| {
            let coverage = projected_coverage(cam, quad)?;
            if coverage < view_min_frac {
                return None;
            }
            let to_camera = cam.center() - centroid;
            let dist = to_camera.norm();
            let cos = normal.dot(to_camera) / dist;
            (cos > 0.0).then_some(ViewScore {
                camera,
                coverage,
                score: cos / dist,
            })
        })
        .collect()
}

/// One view resampled on a facade grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoLayer {
    pub grid: OrthoGrid,
    /// Camera index the layer was sampled from.
    pub view: usize,
    pub rgb: Vec<[u8; 3]>,
    pub valid: Vec<bool>,
    pub score: Vec<f64>,
}

fn to_u8(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Samples `image` at every grid pixel center whose projection is in
/// frame, in front of the camera, and not covered by `hard_mask`.
pub fn rectify_view(
    cam: &PinholeCamera,
    view: &ViewScore,
    image: &RgbImage,
    hard_mask: &BinaryMask,
    soft_mask: &SoftMask,
    quad: &FacadeQuad,
    gsd: f64,
) -> Result<OrthoLayer> {
    let grid = OrthoGrid::for_quad(quad, gsd)?;
    let n = grid.len();
    let mut layer = OrthoLayer {
        grid,
        view: view.camera,
        rgb: vec![[0; 3]; n],
        valid: vec![false; n],
        score: vec![0.0; n],
    };
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            let i = row as usize * grid.cols as usize + col as usize;
            let p = grid.world_point(col, row);
            if cam.depth(p) <= MIN_DEPTH {
                continue;
            }
            let Some((u, v)) = cam.project(p) else {
                continue;
            };
            if !cam.contains(u, v) {
                continue;
            }
            let Some((px, py)) = cam.pixel_of(u, v) else {
                continue;
            };
            if hard_mask.get(px, py) {
                continue;
            }
            let c = image.sample_bilinear(u, v);
            layer.rgb[i] = [to_u8(c[0]), to_u8(c[1]), to_u8(c[2])];
            layer.valid[i] = true;
            layer.score[i] = view.score * (1.0 - soft_mask.get(px, py));
        }
    }
    Ok(layer)
}

/// Occlusion-free facade texture.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoFrame {
    pub grid: OrthoGrid,
    pub rgb: Vec<[u8; 3]>,
    /// Camera index of each valid pixel; `None` marks a hole.
    pub source: Vec<Option<usize>>,
}

impl OrthoFrame {
    pub fn empty(grid: OrthoGrid) -> Self {
        Self {
            grid,
            rgb: vec![[0; 3]; grid.len()],
            source: vec![None; grid.len()],
        }
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.source[i].is_some()
    }

    pub fn valid_count(&self) -> usize {
        self.source.iter().filter(|s| s.is_some()).count()
    }

    pub fn hole_count(&self) -> usize {
        self.grid.len() - self.valid_count()
    }

    /// Texture as an image, holes black.
    pub fn to_image(&self) -> RgbImage {
        let mut img = RgbImage::new(self.grid.cols, self.grid.rows);
        for (i, (rgb, src)) in self.rgb.iter().zip(&self.source).enumerate() {
            if src.is_some() {
                img.data[i * 3..i * 3 + 3].copy_from_slice(rgb);
            }
        }
        img
    }
}

/// Keeps, per pixel, the valid sample with the highest score; ties go to
/// the lowest camera index.
pub fn mosaic(grid: OrthoGrid, layers: &[OrthoLayer]) -> Result<OrthoFrame> {
    if let Some(bad) = layers.iter().find(|l| !l.grid.same_layout(&grid)) {
        return Err(Error::GridMismatch(format!(
            "layer from camera {} does not share the mosaic grid",
            bad.view
        )));
    }
    let mut frame = OrthoFrame::empty(grid);
    for i in 0..grid.len() {
        let mut best: Option<&OrthoLayer> = None;
        for layer in layers.iter().filter(|l| l.valid[i]) {
            best = match best {
                Some(b) if b.score[i] > layer.score[i] => Some(b),
                Some(b) if b.score[i] == layer.score[i] && b.view <= layer.view => Some(b),
                _ => Some(layer),
            };
        }
        if let Some(b) = best {
            frame.rgb[i] = b.rgb[i];
            frame.source[i] = Some(b.view);
        }
    }
    Ok(frame)
}

/// Gray-world white balance over the valid pixels. Holes are untouched and
/// an all-hole frame is returned as is.
pub fn gray_world_balance(frame: &OrthoFrame) -> OrthoFrame {
    let n = frame.valid_count();
    if n == 0 {
        return frame.clone();
    }
    let mut sums = [0.0f64; 3];
    for (rgb, _) in frame.rgb.iter().zip(&frame.source).filter(|(_, s)| s.is_some()) {
        for k in 0..3 {
            sums[k] += rgb[k] as f64;
        }
    }
    let means = sums.map(|s| s / n as f64);
    let gray = (means[0] + means[1] + means[2]) / 3.0;
    let gains = means.map(|m| if m > 0.0 { gray / m } else { 1.0 });
    let mut out = frame.clone();
    for (rgb, src) in out.rgb.iter_mut().zip(&frame.source) {
        if src.is_some() {
            for k in 0..3 {
                rgb[k] = to_u8(rgb[k] as f64 * gains[k]);
            }
        }
    }
    out
}

/// Mask set exactly at the holes of `frame`.
pub fn export_hole_map(frame: &OrthoFrame) -> BinaryMask {
    let cols = frame.grid.cols;
    BinaryMask::from_fn(cols, frame.grid.rows, |x, y| {
        frame.source[y as usize * cols as usize + x as usize].is_none()
    })
}
