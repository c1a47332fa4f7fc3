//! Facade clusters from hyper-points and cadastral segments.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point2, Segment2};
use crate::ingest::{PipelineConfig, PointRecord};

/// Hyper-points attached to one cadastral segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacadeCluster {
    pub segment_id: u32,
    /// Indices into the dataset point list, ascending.
    pub point_indices: Vec<usize>,
}

impl FacadeCluster {
    pub fn count(&self) -> usize {
        self.point_indices.len()
    }
}

struct SegmentFrame {
    id: u32,
    origin: Point2,
    dir: Point2,
    length: f64,
}

/// Assigns every hyper-point within the band of at least one segment to the
/// segment with the smallest perpendicular distance (ties to the smaller id).
///
/// The band of a segment is `|t| <= neighborhood` across and
/// `-margin <= s <= length + margin` along it, with
/// `margin = cfg.occ_extent_margin`. Clusters smaller than
/// `cfg.min_cluster_pts` are dropped; the rest come out sorted by segment id.
pub fn extract_facade_clusters(
    hyper: &[usize],
    points: &[PointRecord],
    cadastre: &[Segment2],
    cfg: &PipelineConfig,
) -> Result<Vec<FacadeCluster>> {
    if cadastre.is_empty() {
        return Err(Error::InvalidInput("cadastral map has no segments".into()));
    }
    let frames: Vec<SegmentFrame> = cadastre
        .iter()
        .map(|s| SegmentFrame {
            id: s.id,
            origin: s.p1,
            dir: s.direction(),
            length: s.length(),
        })
        .collect();
    let band = cfg.neighborhood;
    let margin = cfg.occ_extent_margin;

    let assignment: Vec<Option<u32>> = hyper
        .par_iter()
        .map(|&i| {
            let p = points[i].point.xy();
            let mut best: Option<(f64, u32)> = None;
            for f in &frames {
                let rel = p - f.origin;
                let s = rel.dot(f.dir);
                let t = f.dir.cross(rel).abs();
                if t > band || s < -margin || s > f.length + margin {
                    continue;
                }
                if best.is_none_or(|(bt, bid)| t < bt || (t == bt && f.id < bid)) {
                    best = Some((t, f.id));
                }
            }
            best.map(|(_, id)| id)
        })
        .collect();

    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (&i, id) in hyper.iter().zip(&assignment) {
        if let Some(id) = id {
            groups.entry(*id).or_default().push(i);
        }
    }
    Ok(groups
        .into_iter()
        .filter(|(_, members)| members.len() >= cfg.min_cluster_pts)
        .map(|(segment_id, mut point_indices)| {
            point_indices.sort_unstable();
            FacadeCluster {
                segment_id,
                point_indices,
            }
        })
        .collect())
}
