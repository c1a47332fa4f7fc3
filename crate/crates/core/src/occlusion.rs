//! Laser points standing between the trajectory and a facade.

use crate::geometry::{FacadeQuad, Point3};
use crate::ingest::{PipelineConfig, PointRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointSource {
    /// A laser return; `index` points into the dataset point list.
    Measured { index: usize },
    /// A corner added by cube dilation.
    CubeSynthetic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccluderPoint {
    pub position: Point3,
    pub source: PointSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccluderSet {
    pub segment_id: u32,
    pub points: Vec<OccluderPoint>,
}

impl OccluderSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Dataset indices of the measured occluders, ascending.
    pub fn measured_indices(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .points
            .iter()
            .filter_map(|p| match p.source {
                PointSource::Measured { index } => Some(index),
                PointSource::CubeSynthetic => None,
            })
            .collect();
        out.sort_unstable();
        out
    }
}

/// Band test for a single point:
/// street-side distance in `[occ_d_min, occ_d_max]`, abscissa within the
/// facade extent grown by `occ_extent_margin`, altitude in
/// `(z_bottom + occ_ground_eps, z_top]`.
pub fn in_occlusion_band(quad: &FacadeQuad, cfg: &PipelineConfig, p: Point3) -> bool {
    let d = quad.plane.signed_distance(p);
    if d < cfg.occ_d_min || d > cfg.occ_d_max {
        return false;
    }
    let s = quad.abscissa(p);
    if s < -cfg.occ_extent_margin || s > quad.length() + cfg.occ_extent_margin {
        return false;
    }
    p.z > quad.z_bottom + cfg.occ_ground_eps && p.z <= quad.z_top
}

/// Points inside the occlusion band of `quad`, or nothing when fewer than
/// `occ_min_pts` qualify.
pub fn detect_occluding_points(
    points: &[PointRecord],
    quad: &FacadeQuad,
    cfg: &PipelineConfig,
) -> OccluderSet {
    let retained: Vec<OccluderPoint> = points
        .iter()
        .enumerate()
        .filter(|(_, r)| in_occlusion_band(quad, cfg, r.point))
        .map(|(index, r)| OccluderPoint {
            position: r.point,
            source: PointSource::Measured { index },
        })
        .collect();
    OccluderSet {
        segment_id: quad.segment_id,
        points: if retained.len() >= cfg.occ_min_pts {
            retained
        } else {
            Vec::new()
        },
    }
}

/// Grows every measured occluder into itself plus the eight corners of the
/// cube of half-edge `half_edge` centred on it. Synthetic points pass through.
pub fn cube_dilate(occ: &OccluderSet, half_edge: f64) -> OccluderSet {
    let mut points = Vec::with_capacity(occ.points.len() * 9);
    for p in &occ.points {
        points.push(*p);
        if let PointSource::Measured { .. } = p.source {
            for sx in [-1.0, 1.0] {
                for sy in [-1.0, 1.0] {
                    for sz in [-1.0, 1.0] {
                        points.push(OccluderPoint {
                            position: p.position + Point3::new(sx, sy, sz) * half_edge,
                            source: PointSource::CubeSynthetic,
                        });
                    }
                }
            }
        }
    }
    OccluderSet {
        segment_id: occ.segment_id,
        points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{LodFlag, Point2, VerticalPlane};

    /// Facade on y = 10 facing -y, 10 m long, z in [0.15, 8].
    fn quad() -> FacadeQuad {
        FacadeQuad {
            segment_id: 3,
            e1: Point2::new(0.0, 10.0),
            e2: Point2::new(10.0, 10.0),
            z_bottom: 0.15,
            z_top: 8.0,
            plane: VerticalPlane::new(0.0, -1.0, -10.0).unwrap(),
            msd: 0.0,
            lod: LodFlag::Smooth,
        }
    }

    fn rec(x: f64, y: f64, z: f64) -> PointRecord {
        PointRecord {
            point: Point3::new(x, y, z),
            frame_id: 0,
        }
    }

    fn cfg(min: usize) -> PipelineConfig {
        PipelineConfig {
            occ_min_pts: min,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn band_predicates() {
        let (q, c) = (quad(), cfg(1));
        assert!(in_occlusion_band(&q, &c, Point3::new(5.0, 8.5, 2.0)));
        // wall relief
        assert!(!in_occlusion_band(&q, &c, Point3::new(5.0, 9.95, 2.0)));
        // behind the facade
        assert!(!in_occlusion_band(&q, &c, Point3::new(5.0, 11.0, 2.0)));
        // ground return
        assert!(!in_occlusion_band(&q, &c, Point3::new(5.0, 8.0, 0.25)));
        // beyond the extent margin, above the top
        assert!(!in_occlusion_band(&q, &c, Point3::new(10.6, 8.0, 2.0)));
        assert!(in_occlusion_band(&q, &c, Point3::new(10.4, 8.0, 2.0)));
        assert!(!in_occlusion_band(&q, &c, Point3::new(5.0, 8.0, 8.1)));
        assert!(in_occlusion_band(&q, &c, Point3::new(5.0, 8.0, 8.0)));
    }

    #[test]
    fn all_or_nothing_threshold() {
        let blob: Vec<_> = (0..30).map(|k| rec(5.0, 8.0, 1.0 + 0.1 * k as f64)).collect();
        let occ = detect_occluding_points(&blob, &quad(), &cfg(30));
        assert_eq!(occ.len(), 30);
        assert_eq!(occ.measured_indices(), (0..30).collect::<Vec<_>>());
        let occ = detect_occluding_points(&blob[..29], &quad(), &cfg(30));
        assert!(occ.is_empty());
    }

    #[test]
    fn cube_corners() {
        let occ = OccluderSet {
            segment_id: 1,
            points: vec![OccluderPoint {
                position: Point3::new(0.0, 0.0, 0.0),
                source: PointSource::Measured { index: 4 },
            }],
        };
        let grown = cube_dilate(&occ, 0.1);
        assert_eq!(grown.len(), 9);
        assert_eq!(grown.points[0], occ.points[0]);
        let mut corners: Vec<_> = grown.points[1..].iter().map(|p| p.position).collect();
        corners.sort_by(|a, b| (a.x, a.y, a.z).partial_cmp(&(b.x, b.y, b.z)).unwrap());
        let mut expected = Vec::new();
        for sx in [-0.1, 0.1] {
            for sy in [-0.1, 0.1] {
                for sz in [-0.1, 0.1] {
                    expected.push(Point3::new(sx, sy, sz));
                }
            }
        }
        assert_eq!(corners, expected);
        assert!(grown.points[1..].iter().all(|p| p.source == PointSource::CubeSynthetic));
        assert_eq!(grown.measured_indices(), vec![4]);
    }

    #[test]
    fn cube_count_and_centroid() {
        let occ = OccluderSet {
            segment_id: 1,
            points: (0..12)
                .map(|k| OccluderPoint {
                    position: Point3::new(k as f64, 2.0 * k as f64, 1.5),
                    source: PointSource::Measured { index: k },
                })
                .collect(),
        };
        let grown = cube_dilate(&occ, 0.1);
        assert_eq!(grown.len(), 108);
        for (group, p) in grown.points.chunks(9).zip(&occ.points) {
            let c = group.iter().fold(Point3::default(), |a, q| a + q.position) * (1.0 / 9.0);
            assert!(c.distance(p.position) < 1e-12);
        }
    }
}
