//! Accuracy metrics against simulator ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::FacadeQuad;
use crate::ingest::{PipelineConfig, PointRecord, RgbImage};
use crate::synth::PointLabel;
use crate::texturing::OrthoFrame;

/// Planimetric deviation between estimated and true facade extremities.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationStats {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    /// `(segment_id, deviation)` sorted by id.
    pub per_facade: Vec<(u32, f64)>,
}

/// Per facade, the mean of the two endpoint distances `|e1 - e1'|` and
/// `|e2 - e2'|`, quads matched by segment id.
pub fn planimetric_deviation(est: &[FacadeQuad], truth: &[FacadeQuad]) -> Result<DeviationStats> {
    let est_by_id: BTreeMap<u32, &FacadeQuad> = est.iter().map(|q| (q.segment_id, q)).collect();
    let truth_by_id: BTreeMap<u32, &FacadeQuad> = truth.iter().map(|q| (q.segment_id, q)).collect();
    let est_ids: BTreeSet<u32> = est_by_id.keys().copied().collect();
    let truth_ids: BTreeSet<u32> = truth_by_id.keys().copied().collect();
    let unmatched: Vec<u32> = est_ids.symmetric_difference(&truth_ids).copied().collect();
    if !unmatched.is_empty() {
        return Err(Error::Unmatched(unmatched));
    }
    if est_ids.is_empty() {
        return Err(Error::InvalidInput("no facades to compare".into()));
    }
    let per_facade: Vec<(u32, f64)> = est_by_id
        .iter()
        .map(|(&id, a)| {
            let b = truth_by_id[&id];
            (id, 0.5 * (a.e1.distance(b.e1) + a.e2.distance(b.e2)))
        })
        .collect();
    let values = per_facade.iter().map(|&(_, d)| d);
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = values.clone().fold(f64::INFINITY, f64::min);
    let mean = values.sum::<f64>() / per_facade.len() as f64;
    Ok(DeviationStats {
        max,
        min,
        mean,
        per_facade,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureError {
    /// Mean absolute error over valid pixels and channels, 0..=255;
    /// `None` when the frame has no valid pixel.
    pub mae: Option<f64>,
    pub hole_frac: f64,
}

pub fn texture_error(frame: &OrthoFrame, truth: &RgbImage) -> Result<TextureError> {
    if (truth.width, truth.height) != (frame.grid.cols, frame.grid.rows) {
        return Err(Error::GridMismatch(format!(
            "texture is {}x{}, truth is {}x{}",
            frame.grid.cols, frame.grid.rows, truth.width, truth.height
        )));
    }
    let mut total = 0u64;
    let mut valid = 0usize;
    for (i, (rgb, src)) in frame.rgb.iter().zip(&frame.source).enumerate() {
        if src.is_none() {
            continue;
        }
        valid += 1;
        let t = &truth.data[i * 3..i * 3 + 3];
        total += (0..3).map(|k| (rgb[k] as i32 - t[k] as i32).unsigned_abs() as u64).sum::<u64>();
    }
    let n = frame.grid.len();
    Ok(TextureError {
        mae: (valid > 0).then(|| total as f64 / (3 * valid) as f64),
        hole_frac: (n - valid) as f64 / n as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionScore {
    /// `None` when there is no true occluder.
    pub recall: Option<f64>,
    /// `None` when nothing was detected.
    pub precision: Option<f64>,
}

/// Recall and precision of detected point indices against true ones.
pub fn occlusion_recall(detected: &[usize], truth: &[usize]) -> DetectionScore {
    let detected: BTreeSet<usize> = detected.iter().copied().collect();
    let truth: BTreeSet<usize> = truth.iter().copied().collect();
    let hits = detected.intersection(&truth).count() as f64;
    DetectionScore {
        recall: (!truth.is_empty()).then(|| hits / truth.len() as f64),
        precision: (!detected.is_empty()).then(|| hits / detected.len() as f64),
    }
}

/// Occluder-labelled points inside the band extent of `quad`: street-side
/// distance in `[occ_d_min, occ_d_max]`, abscissa within the extended facade
/// extent, altitude at most `z_top`.
pub fn true_occluders(
    points: &[PointRecord],
    labels: &[PointLabel],
    quad: &FacadeQuad,
    cfg: &PipelineConfig,
) -> Vec<usize> {
    points
        .iter()
        .zip(labels)
        .enumerate()
        .filter(|(_, (r, l))| {
            if !matches!(l, PointLabel::Occluder) {
                return false;
            }
            let p = r.point;
            let d = quad.plane.signed_distance(p);
            let s = quad.abscissa(p);
            (cfg.occ_d_min..=cfg.occ_d_max).contains(&d)
                && s >= -cfg.occ_extent_margin
                && s <= quad.length() + cfg.occ_extent_margin
                && p.z <= quad.z_top
        })
        .map(|(i, _)| i)
        .collect()
}

/// Per-facade rows of the metrics report.
#[derive(Debug, Clone, PartialEq)]
pub struct FacadeMetrics {
    pub segment_id: u32,
    pub texture: Option<TextureError>,
    pub detection: Option<DetectionScore>,
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.digits$}"))
}

/// Text report: planimetric deviation block followed by per-facade texture
/// and occluder detection rows.
pub fn format_report(dev: &DeviationStats, facades: &[FacadeMetrics]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Deviation in planimetry, (x, y) plane");
    let _ = writeln!(s, "maximum_deviation_m {:.4}", dev.max);
    let _ = writeln!(s, "minimum_deviation_m {:.4}", dev.min);
    let _ = writeln!(s, "average_deviation_m {:.4}", dev.mean);
    let _ = writeln!(s, "facades {}", dev.per_facade.len());
    let _ = writeln!(s);
    let _ = writeln!(s, "# segment_id deviation_m texture_mae hole_frac recall precision");
    for &(id, d) in &dev.per_facade {
        let m = facades.iter().find(|f| f.segment_id == id);
        let tex = m.and_then(|m| m.texture);
        let det = m.and_then(|m| m.detection);
        let _ = writeln!(
            s,
            "{id} {d:.4} {} {} {} {}",
            opt(tex.and_then(|t| t.mae), 3),
            opt(tex.map(|t| t.hole_frac), 4),
            opt(det.and_then(|d| d.recall), 4),
            opt(det.and_then(|d| d.precision), 4),
        );
    }
    s
}
