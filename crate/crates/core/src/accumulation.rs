//! Planimetric accumulation map.
//!
//! Every point votes for the grid cell containing its (x, y) position. Cells
//! reached by more than one point indicate vertical structures: their points
//! are the hyper-points. Cells with a single vote hold the remaining,
//! mostly horizontal, surfaces.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{GrayImage, PointRecord};

/// Upper bound on the number of cells, guarding against absurd extents.
const MAX_CELLS: usize = 1 << 30;

/// Vote raster with the cell-to-point relation kept alongside.
///
/// Cell `(u, v)` covers `[ox + uΔ, ox + (u+1)Δ) × [oy + vΔ, oy + (v+1)Δ)`.
/// Point indices of each cell are stored contiguously and in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct AccumulationGrid {
    origin_x: f64,
    origin_y: f64,
    step: f64,
    n_u: usize,
    n_v: usize,
    scores: Vec<u32>,
    cell_start: Vec<usize>,
    indices: Vec<usize>,
}

impl AccumulationGrid {
    pub fn origin(&self) -> (f64, f64) {
        (self.origin_x, self.origin_y)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_u, self.n_v)
    }

    pub fn point_count(&self) -> usize {
        self.indices.len()
    }

    pub fn score(&self, u: usize, v: usize) -> u32 {
        self.scores[v * self.n_u + u]
    }

    pub fn points_in(&self, u: usize, v: usize) -> &[usize] {
        let c = v * self.n_u + u;
        &self.indices[self.cell_start[c]..self.cell_start[c + 1]]
    }

    /// Cell containing the planimetric position `(x, y)`, if inside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let u = ((x - self.origin_x) / self.step).floor();
        let v = ((y - self.origin_y) / self.step).floor();
        (u >= 0.0 && v >= 0.0 && (u as usize) < self.n_u && (v as usize) < self.n_v)
            .then_some((u as usize, v as usize))
    }

    /// Non-empty cells as `(u, v, score)` in row-major order.
    pub fn occupied_cells(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0)
            .map(|(c, &s)| (c % self.n_u, c / self.n_u, s))
    }

    /// Score map as a grayscale image, scores clamped to 255, north up.
    pub fn score_image(&self) -> GrayImage {
        let mut img = GrayImage::new(self.n_u as u32, self.n_v as u32);
        for v in 0..self.n_v {
            let row = self.n_v - 1 - v;
            for u in 0..self.n_u {
                img.data[row * self.n_u + u] = self.score(u, v).min(255) as u8;
            }
        }
        img
    }
}

fn cell_coord(value: f64, origin: f64, step: f64) -> i64 {
    ((value - origin) / step).floor() as i64
}

/// Grid origin: the minimum snapped down to a multiple of `step`, nudged one
/// step lower if rounding put the minimum outside the first cell.
fn snapped_origin(min: f64, step: f64) -> f64 {
    let mut origin = (min / step).floor() * step;
    while cell_coord(min, origin, step) < 0 {
        origin -= step;
    }
    origin
}

pub fn build_accumulation_map(points: &[PointRecord], step: f64) -> Result<AccumulationGrid> {
    if points.is_empty() {
        return Err(Error::InvalidInput("cannot accumulate an empty point cloud".into()));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidInput(format!("grid step must be > 0, got {step}")));
    }
    if let Some(bad) = points.iter().find(|p| !p.point.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite point {:?}", bad.point)));
    }
    let (min_x, min_y) = points
        .iter()
        .fold((f64::INFINITY, f64::INFINITY), |(mx, my), p| (mx.min(p.point.x), my.min(p.point.y)));
    let origin_x = snapped_origin(min_x, step);
    let origin_y = snapped_origin(min_y, step);

    let cells: Vec<(i64, i64)> = points
        .par_iter()
        .map(|p| (cell_coord(p.point.x, origin_x, step), cell_coord(p.point.y, origin_y, step)))
        .collect();
    let n_u = cells.iter().map(|c| c.0).max().unwrap_or(0) as usize + 1;
    let n_v = cells.iter().map(|c| c.1).max().unwrap_or(0) as usize + 1;
    let n_cells = n_u
        .checked_mul(n_v)
        .filter(|&n| n <= MAX_CELLS)
        .ok_or_else(|| Error::InvalidInput(format!("grid of {n_u}x{n_v} cells is too large")))?;

    let flat: Vec<usize> = cells.iter().map(|&(u, v)| v as usize * n_u + u as usize).collect();
    let mut scores = vec![0u32; n_cells];
    for &c in &flat {
        scores[c] += 1;
    }
    let mut cell_start = Vec::with_capacity(n_cells + 1);
    let mut acc = 0usize;
    cell_start.push(0);
    for &s in &scores {
        acc += s as usize;
        cell_start.push(acc);
    }
    let mut cursor = cell_start[..n_cells].to_vec();
    let mut indices = vec![0usize; points.len()];
    for (i, &c) in flat.iter().enumerate() {
        indices[cursor[c]] = i;
        cursor[c] += 1;
    }

    Ok(AccumulationGrid {
        origin_x,
        origin_y,
        step,
        n_u,
        n_v,
        scores,
        cell_start,
        indices,
    })
}

/// Point indices split by the density rule `S > 1`, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HyperSplit {
    /// Points in cells with more than one vote (potential vertical objects).
    pub hyper: Vec<usize>,
    /// Points alone in their cell (potential flat surfaces).
    pub surface: Vec<usize>,
}

impl HyperSplit {
    /// Membership flags for the hyper-point set, indexed by point.
    pub fn hyper_mask(&self, n_points: usize) -> Vec<bool> {
        let mut mask = vec![false; n_points];
        for &i in &self.hyper {
            mask[i] = true;
        }
        mask
    }
}

pub fn split_hyper_points(grid: &AccumulationGrid) -> HyperSplit {
    let mut split = HyperSplit::default();
    for (c, &score) in grid.scores.iter().enumerate() {
        let members = &grid.indices[grid.cell_start[c]..grid.cell_start[c + 1]];
        match score {
            0 => {}
            1 => split.surface.extend_from_slice(members),
            _ => split.hyper.extend_from_slice(members),
        }
    }
    split.hyper.sort_unstable();
    split.surface.sort_unstable();
    split
}
