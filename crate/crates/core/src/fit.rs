//! Facade plane, extremities and altitudes from a facade cluster.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::extract::FacadeCluster;
use crate::geometry::{FacadeQuad, LodFlag, Point2, Point3, Segment2, VerticalPlane};
use crate::ingest::{FrameTable, PipelineConfig, PointRecord};

/// Covariance scale under which a cluster is treated as a single point.
const RANK_ZERO_EPS: f64 = 1e-24;
/// Relative eigenvalue gap under which no direction dominates.
const ISOTROPY_EPS: f64 = 1e-12;

/// Orthogonal least-squares vertical plane through planimetric positions.
///
/// The normal is the minor eigenvector of the 2×2 planimetric covariance,
/// oriented so that most of `sensors` lie on its positive side.
pub fn fit_vertical_plane(points: &[Point3], sensors: &[Point3]) -> Result<VerticalPlane> {
    if points.len() < 2 {
        return Err(Error::Degenerate(format!(
            "plane fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
    let centroid = Point2::new(sx / n, sy / n);
    let (mut cxx, mut cxy, mut cyy) = (0.0, 0.0, 0.0);
    for p in points {
        let dx = p.x - centroid.x;
        let dy = p.y - centroid.y;
        cxx += dx * dx;
        cxy += dx * dy;
        cyy += dy * dy;
    }
    let (cxx, cxy, cyy) = (cxx / n, cxy / n, cyy / n);

    let half_trace = 0.5 * (cxx + cyy);
    let radius = (0.5 * (cxx - cyy)).hypot(cxy);
    let major = half_trace + radius;
    let minor = half_trace - radius;
    if major <= RANK_ZERO_EPS {
        return Err(Error::Degenerate("cluster has no planimetric extent".into()));
    }
    if major - minor <= ISOTROPY_EPS * major {
        return Err(Error::Degenerate(
            "planimetric covariance is isotropic; no dominant direction".into(),
        ));
    }
    let theta = 0.5 * (2.0 * cxy).atan2(cxx - cyy);
    let normal = Point2::new(-theta.sin(), theta.cos());
    let plane = VerticalPlane::through(normal, centroid)?;

    let (front, back) = sensors.iter().fold((0usize, 0usize), |(f, b), s| {
        let d = plane.signed_distance(*s);
        if d > 0.0 {
            (f + 1, b)
        } else if d < 0.0 {
            (f, b + 1)
        } else {
            (f, b)
        }
    });
    Ok(if back > front { plane.flipped() } else { plane })
}

/// Orthogonal projection of the segment extremities onto `plane`.
pub fn project_endpoints(plane: &VerticalPlane, seg: &Segment2) -> Result<(Point2, Point2)> {
    let e1 = plane.project(seg.p1);
    let e2 = plane.project(seg.p2);
    if e1.distance(e2) <= crate::geometry::MIN_SEGMENT_LENGTH {
        return Err(Error::Degenerate(format!(
            "segment {} is perpendicular to its fitted plane",
            seg.id
        )));
    }
    Ok((e1, e2))
}

fn cluster_frames(points: &[PointRecord], cluster: &FacadeCluster) -> BTreeSet<u32> {
    cluster.point_indices.iter().map(|&i| points[i].frame_id).collect()
}

/// Sensor positions of the distinct frames voting in the cluster.
pub fn cluster_sensor_positions(
    points: &[PointRecord],
    cluster: &FacadeCluster,
    frames: &FrameTable,
) -> Result<Vec<Point3>> {
    cluster_frames(points, cluster)
        .into_iter()
        .map(|id| {
            frames
                .get(&id)
                .map(|f| f.sensor_pos)
                .ok_or_else(|| Error::Reference(format!("frame {id} is missing from the frame table")))
        })
        .collect()
}

/// Facade bottom from the sensor trajectory:
/// mean sensor altitude over the distinct cluster frames, minus the vehicle
/// height, plus the curb height.
pub fn bottom_altitude(
    points: &[PointRecord],
    cluster: &FacadeCluster,
    frames: &FrameTable,
    cfg: &PipelineConfig,
) -> Result<f64> {
    let sensors = cluster_sensor_positions(points, cluster, frames)?;
    if sensors.is_empty() {
        return Err(Error::InvalidInput(format!(
            "cluster {} is empty",
            cluster.segment_id
        )));
    }
    let mean = sensors.iter().map(|s| s.z).sum::<f64>() / sensors.len() as f64;
    Ok(mean - cfg.h_vehicle + cfg.h_curb)
}

/// Per-frame highest points of a cluster and their dispersion.
#[derive(Debug, Clone, PartialEq)]
pub struct TopProfile {
    /// `(frame_id, highest member altitude)` sorted by frame id.
    pub per_frame: Vec<(u32, f64)>,
    /// Lower median of the per-frame maxima.
    pub median: f64,
    /// Mean squared deviation of the per-frame maxima from their mean.
    pub msd: f64,
    pub lod: LodFlag,
}

/// Facade top: the median of per-frame maxima when the top line is regular
/// (`msd <= tau_msd`), else the highest cluster point.
pub fn top_altitude(
    points: &[PointRecord],
    cluster: &FacadeCluster,
    tau_msd: f64,
) -> Result<(f64, TopProfile)> {
    let mut maxima: BTreeMap<u32, f64> = BTreeMap::new();
    for &i in &cluster.point_indices {
        let p = &points[i];
        maxima
            .entry(p.frame_id)
            .and_modify(|z| *z = z.max(p.point.z))
            .or_insert(p.point.z);
    }
    if maxima.is_empty() {
        return Err(Error::InvalidInput(format!(
            "cluster {} is empty",
            cluster.segment_id
        )));
    }
    let per_frame: Vec<(u32, f64)> = maxima.into_iter().collect();
    let n = per_frame.len() as f64;
    let mean = per_frame.iter().map(|&(_, z)| z).sum::<f64>() / n;
    let msd = per_frame.iter().map(|&(_, z)| (z - mean).powi(2)).sum::<f64>() / n;
    let mut sorted: Vec<f64> = per_frame.iter().map(|&(_, z)| z).collect();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[(sorted.len() - 1) / 2];
    let highest = sorted[sorted.len() - 1];

    let (z_top, lod) = if msd > tau_msd {
        (highest, LodFlag::Detailed)
    } else {
        (median, LodFlag::Smooth)
    };
    Ok((
        z_top,
        TopProfile {
            per_frame,
            median,
            msd,
            lod,
        },
    ))
}

pub fn assemble_quad(
    segment_id: u32,
    plane: VerticalPlane,
    e1: Point2,
    e2: Point2,
    z_bottom: f64,
    z_top: f64,
    profile: &TopProfile,
) -> Result<FacadeQuad> {
    if !(z_top > z_bottom) {
        return Err(Error::InvertedBand { z_bottom, z_top });
    }
    Ok(FacadeQuad {
        segment_id,
        e1,
        e2,
        z_bottom,
        z_top,
        plane,
        msd: profile.msd,
        lod: profile.lod,
    })
}

/// Everything estimated for one facade cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct FacadeFit {
    pub quad: FacadeQuad,
    pub profile: TopProfile,
    /// RMS perpendicular distance of cluster points to the plane.
    pub rms_residual: f64,
}

/// Runs plane fit, endpoint projection, bottom and top estimation for one
/// cluster and assembles its quadrilateral.
pub fn fit_facade(
    points: &[PointRecord],
    cluster: &FacadeCluster,
    segment: &Segment2,
    frames: &FrameTable,
    cfg: &PipelineConfig,
) -> Result<FacadeFit> {
    let members: Vec<Point3> = cluster.point_indices.iter().map(|&i| points[i].point).collect();
    let sensors = cluster_sensor_positions(points, cluster, frames)?;
    let plane = fit_vertical_plane(&members, &sensors)?;
    let (e1, e2) = project_endpoints(&plane, segment)?;
    let z_bottom = bottom_altitude(points, cluster, frames, cfg)?;
    let (z_top, profile) = top_altitude(points, cluster, cfg.tau_msd)?;
    let quad = assemble_quad(segment.id, plane, e1, e2, z_bottom, z_top, &profile)?;
    let rms_residual = (members
        .iter()
        .map(|p| plane.signed_distance(*p).powi(2))
        .sum::<f64>()
        / members.len() as f64)
        .sqrt();
    Ok(FacadeFit {
        quad,
        profile,
        rms_residual,
    })
}
