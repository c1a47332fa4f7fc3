//! Dataset files, rasters and pipeline configuration.
//!
//! All dataset files are whitespace-separated text, one record per line,
//! with `#` comments and blank lines ignored:
//!
//! | file     | record                                                    |
//! |----------|-----------------------------------------------------------|
//! | points   | `x y z frame_id`                                          |
//! | frames   | `frame_id sx sy sz`                                       |
//! | cadastre | `segment_id x1 y1 x2 y2`                                  |
//! | cameras  | `cam_id image_path fx fy cx cy width height r11 .. r33 tx ty tz` |
//! | quads    | `segment_id e1x e1y e2x e2y z_bottom z_top msd lod_flag`   |
//!
//! Camera rotations are camera-to-world, row-major. Image paths are resolved
//! relative to the directory of the cameras file.

mod config;
mod raster;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};

pub use config::{load_config, PipelineConfig};
pub(crate) use config::strip_comment;
pub use raster::{encode_netpbm, read_gray, read_image, write_gray, write_image, GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::geometry::{FacadeQuad, LodFlag, PinholeCamera, Point2, Point3, RigidPose, Segment2, VerticalPlane};

/// Tolerance on `RᵀR = I` for parsed camera rotations.
pub const POSE_ORTHONORMAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointRecord {
    pub point: Point3,
    pub frame_id: u32,
}

/// One vertical sweep of the laser and the sensor position it was shot from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserFrame {
    pub frame_id: u32,
    pub sensor_pos: Point3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraEntry {
    pub id: u32,
    pub camera: PinholeCamera,
    /// Path as written in the cameras file.
    pub image_path: PathBuf,
    pub image: RgbImage,
}

pub type FrameTable = BTreeMap<u32, LaserFrame>;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<PointRecord>,
    pub frames: FrameTable,
    pub cadastre: Vec<Segment2>,
    pub cameras: Vec<CameraEntry>,
}

pub fn load_dataset(
    points_path: impl AsRef<Path>,
    frames_path: impl AsRef<Path>,
    cadastre_path: impl AsRef<Path>,
    cameras_path: impl AsRef<Path>,
) -> Result<Dataset> {
    let frames = parse_frames(frames_path.as_ref())?;
    let points = parse_points(points_path.as_ref())?;
    if let Some(orphan) = points.iter().find(|p| !frames.contains_key(&p.frame_id)) {
        return Err(Error::Reference(format!(
            "{}: point ({}, {}, {}) references unknown frame {}",
            points_path.as_ref().display(),
            orphan.point.x,
            orphan.point.y,
            orphan.point.z,
            orphan.frame_id
        )));
    }
    let cadastre = parse_cadastre(cadastre_path.as_ref())?;
    let cameras = parse_cameras(cameras_path.as_ref())?;
    Ok(Dataset {
        points,
        frames,
        cadastre,
        cameras,
    })
}

struct Record<'a> {
    line: usize,
    fields: Vec<&'a str>,
}

fn records<'a>(text: &'a str) -> impl Iterator<Item = Record<'a>> + 'a {
    text.lines().enumerate().filter_map(|(idx, raw)| {
        let fields: Vec<&str> = strip_comment(raw).split_whitespace().collect();
        (!fields.is_empty()).then_some(Record {
            line: idx + 1,
            fields,
        })
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

impl Record<'_> {
    fn expect_len(&self, path: &Path, n: usize) -> Result<()> {
        if self.fields.len() != n {
            return Err(parse_error(
                path,
                self.line,
                format!("expected {n} fields, found {}", self.fields.len()),
            ));
        }
        Ok(())
    }

    fn real(&self, path: &Path, i: usize) -> Result<f64> {
        self.fields[i]
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| {
                parse_error(path, self.line, format!("field {}: bad number {:?}", i + 1, self.fields[i]))
            })
    }

    fn int<T: std::str::FromStr>(&self, path: &Path, i: usize) -> Result<T> {
        self.fields[i].parse::<T>().map_err(|_| {
            parse_error(path, self.line, format!("field {}: bad integer {:?}", i + 1, self.fields[i]))
        })
    }
}

pub fn parse_points(path: &Path) -> Result<Vec<PointRecord>> {
    let text = read_text(path)?;
    records(&text)
        .map(|r| {
            r.expect_len(path, 4)?;
            Ok(PointRecord {
                point: Point3::new(r.real(path, 0)?, r.real(path, 1)?, r.real(path, 2)?),
                frame_id: r.int(path, 3)?,
            })
        })
        .collect()
}

pub fn parse_frames(path: &Path) -> Result<FrameTable> {
    let text = read_text(path)?;
    let mut frames = FrameTable::new();
    for r in records(&text) {
        r.expect_len(path, 4)?;
        let frame = LaserFrame {
            frame_id: r.int(path, 0)?,
            sensor_pos: Point3::new(r.real(path, 1)?, r.real(path, 2)?, r.real(path, 3)?),
        };
        if frames.insert(frame.frame_id, frame).is_some() {
            return Err(parse_error(path, r.line, format!("duplicate frame id {}", frame.frame_id)));
        }
    }
    Ok(frames)
}

pub fn parse_cadastre(path: &Path) -> Result<Vec<Segment2>> {
    let text = read_text(path)?;
    let mut seen = std::collections::BTreeSet::new();
    records(&text)
        .map(|r| {
            r.expect_len(path, 5)?;
            let id: u32 = r.int(path, 0)?;
            if !seen.insert(id) {
                return Err(parse_error(path, r.line, format!("duplicate segment id {id}")));
            }
            let p1 = Point2::new(r.real(path, 1)?, r.real(path, 2)?);
            let p2 = Point2::new(r.real(path, 3)?, r.real(path, 4)?);
            Segment2::new(id, p1, p2).map_err(|e| parse_error(path, r.line, e.to_string()))
        })
        .collect()
}

pub fn parse_cameras(path: &Path) -> Result<Vec<CameraEntry>> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    records(&text)
        .map(|r| {
            r.expect_len(path, 20)?;
            let id: u32 = r.int(path, 0)?;
            let image_path = PathBuf::from(r.fields[1]);
            let mut m = [0.0; 9];
            for (k, v) in m.iter_mut().enumerate() {
                *v = r.real(path, 8 + k)?;
            }
            let rotation = Matrix3::from_row_slice(&m);
            let translation = Vector3::new(r.real(path, 17)?, r.real(path, 18)?, r.real(path, 19)?);
            let pose = RigidPose::with_tolerance(rotation, translation, POSE_ORTHONORMAL_TOL)
                .map_err(|e| parse_error(path, r.line, format!("camera {id}: {e}")))?;
            let camera = PinholeCamera::new(
                r.real(path, 2)?,
                r.real(path, 3)?,
                r.real(path, 4)?,
                r.real(path, 5)?,
                r.int(path, 6)?,
                r.int(path, 7)?,
                pose,
            )
            .map_err(|e| parse_error(path, r.line, format!("camera {id}: {e}")))?;
            let image = read_image(base.join(&image_path))?;
            if (image.width, image.height) != (camera.width, camera.height) {
                return Err(parse_error(
                    path,
                    r.line,
                    format!(
                        "camera {id}: image is {}x{}, calibration says {}x{}",
                        image.width, image.height, camera.width, camera.height
                    ),
                ));
            }
            Ok(CameraEntry {
                id,
                camera,
                image_path,
                image,
            })
        })
        .collect()
}

/// Reads a quads file. The file does not carry the plane orientation, so
/// each quad gets the plane through `e1` and `e2` with the normal to the left
/// of `e1 -> e2`.
pub fn parse_quads(path: &Path) -> Result<Vec<FacadeQuad>> {
    let text = read_text(path)?;
    records(&text)
        .map(|r| {
            r.expect_len(path, 9)?;
            let e1 = Point2::new(r.real(path, 1)?, r.real(path, 2)?);
            let e2 = Point2::new(r.real(path, 3)?, r.real(path, 4)?);
            let seg = Segment2::new(0, e1, e2).map_err(|e| parse_error(path, r.line, e.to_string()))?;
            let dir = seg.direction();
            let plane = VerticalPlane::through(Point2::new(-dir.y, dir.x), e1)?;
            let lod = LodFlag::parse(r.fields[8])
                .ok_or_else(|| parse_error(path, r.line, format!("bad lod flag {:?}", r.fields[8])))?;
            Ok(FacadeQuad {
                segment_id: r.int(path, 0)?,
                e1,
                e2,
                z_bottom: r.real(path, 5)?,
                z_top: r.real(path, 6)?,
                plane,
                msd: r.real(path, 7)?,
                lod,
            })
        })
        .collect()
}

// Writers use `{}` float formatting, which is the shortest representation
// that parses back to the same f64.

pub fn format_points(points: &[PointRecord]) -> String {
    let mut s = String::with_capacity(points.len() * 40);
    for p in points {
        let _ = writeln!(s, "{} {} {} {}", p.point.x, p.point.y, p.point.z, p.frame_id);
    }
    s
}

pub fn format_frames<'a>(frames: impl IntoIterator<Item = &'a LaserFrame>) -> String {
    let mut s = String::new();
    for f in frames {
        let p = f.sensor_pos;
        let _ = writeln!(s, "{} {} {} {}", f.frame_id, p.x, p.y, p.z);
    }
    s
}

pub fn format_cadastre(segments: &[Segment2]) -> String {
    let mut s = String::new();
    for seg in segments {
        let _ = writeln!(s, "{} {} {} {} {}", seg.id, seg.p1.x, seg.p1.y, seg.p2.x, seg.p2.y);
    }
    s
}

pub fn format_quads(quads: &[FacadeQuad]) -> String {
    let mut s = String::new();
    for q in quads {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {} {}",
            q.segment_id,
            q.e1.x,
            q.e1.y,
            q.e2.x,
            q.e2.y,
            q.z_bottom,
            q.z_top,
            q.msd,
            q.lod.as_str()
        );
    }
    s
}

/// One cameras-file line for `camera` with the given image path.
pub fn format_camera_line(id: u32, image_path: &str, cam: &PinholeCamera) -> String {
    let r = &cam.pose.rotation;
    let t = &cam.pose.translation;
    let mut s = format!(
        "{id} {image_path} {} {} {} {} {} {}",
        cam.fx, cam.fy, cam.cx, cam.cy, cam.width, cam.height
    );
    for i in 0..3 {
        for j in 0..3 {
            let _ = write!(s, " {}", r[(i, j)]);
        }
    }
    let _ = write!(s, " {} {} {}", t.x, t.y, t.z);
    s
}
