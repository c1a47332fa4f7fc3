//! Geometric primitives shared by the whole pipeline.
//!
//! World coordinates are projected planimetric meters (x, y) plus altitude
//! (z). Images use a top-left origin with `u` to the right and `v` downward;
//! integer pixel coordinates are pixel centers.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Minimum segment length accepted, in meters.
pub const MIN_SEGMENT_LENGTH: f64 = 1e-6;

/// Depth below which a point is treated as lying on or behind the camera.
pub const MIN_DEPTH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z component of the 3D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn with_z(self, z: f64) -> Point3 {
        Point3::new(self.x, self.y, z)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn xy(self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(self, other: Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Point3) -> Point3 {
        Point3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Point3 {
        self * (1.0 / self.norm())
    }

    pub fn distance(self, other: Point3) -> f64 {
        (self - other).norm()
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Point3::new(v.x, v.y, v.z)
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, rhs: Point3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, rhs: f64) -> Point3 {
        Point3::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// A cadastral facade line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment2 {
    pub id: u32,
    pub p1: Point2,
    pub p2: Point2,
}

impl Segment2 {
    pub fn new(id: u32, p1: Point2, p2: Point2) -> Result<Self> {
        if !(p1.x.is_finite() && p1.y.is_finite() && p2.x.is_finite() && p2.y.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "segment {id} has non-finite endpoints"
            )));
        }
        if p1.distance(p2) <= MIN_SEGMENT_LENGTH {
            return Err(Error::Degenerate(format!(
                "segment {id} is shorter than {MIN_SEGMENT_LENGTH} m"
            )));
        }
        Ok(Self { id, p1, p2 })
    }

    pub fn length(&self) -> f64 {
        self.p1.distance(self.p2)
    }

    /// Unit vector from `p1` to `p2`.
    pub fn direction(&self) -> Point2 {
        let d = self.p2 - self.p1;
        d * (1.0 / d.norm())
    }

    /// Along-segment and signed perpendicular offsets of `p` (z ignored).
    ///
    /// `t` is positive on the left of the `p1 -> p2` direction.
    pub fn frame_coords(&self, p: Point3) -> (f64, f64) {
        let dir = self.direction();
        let rel = p.xy() - self.p1;
        (rel.dot(dir), dir.cross(rel))
    }
}

/// Free-function form of [`Segment2::frame_coords`].
pub fn segment_frame_coords(seg: &Segment2, p: Point3) -> (f64, f64) {
    seg.frame_coords(p)
}

/// Vertical plane `nx * x + ny * y = d` with a unit planimetric normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalPlane {
    pub nx: f64,
    pub ny: f64,
    pub d: f64,
}

impl VerticalPlane {
    /// Builds a plane from any non-zero normal, rescaling `d` with it.
    pub fn new(nx: f64, ny: f64, d: f64) -> Result<Self> {
        let n = nx.hypot(ny);
        if !(n.is_finite() && d.is_finite()) || n < 1e-12 {
            return Err(Error::Degenerate(format!(
                "plane normal ({nx}, {ny}) is not usable"
            )));
        }
        Ok(Self {
            nx: nx / n,
            ny: ny / n,
            d: d / n,
        })
    }

    /// Plane through `point` with unit normal `normal`.
    pub fn through(normal: Point2, point: Point2) -> Result<Self> {
        let n = normal.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::Degenerate("zero plane normal".into()));
        }
        let unit = normal * (1.0 / n);
        Ok(Self {
            nx: unit.x,
            ny: unit.y,
            d: unit.dot(point),
        })
    }

    pub fn normal(&self) -> Point2 {
        Point2::new(self.nx, self.ny)
    }

    pub fn flipped(&self) -> Self {
        Self {
            nx: -self.nx,
            ny: -self.ny,
            d: -self.d,
        }
    }

    pub fn signed_distance(&self, p: Point3) -> f64 {
        self.signed_distance_2d(p.xy())
    }

    pub fn signed_distance_2d(&self, p: Point2) -> f64 {
        self.nx * p.x + self.ny * p.y - self.d
    }

    /// Orthogonal projection of a planimetric point onto the plane.
    pub fn project(&self, p: Point2) -> Point2 {
        let t = self.signed_distance_2d(p);
        p - self.normal() * t
    }
}

/// Free-function form of [`VerticalPlane::signed_distance`].
pub fn signed_plane_distance(plane: &VerticalPlane, p: Point3) -> f64 {
    plane.signed_distance(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LodFlag {
    /// Flat top, altitude taken as the median of per-frame maxima.
    Smooth,
    /// Irregular top, altitude taken as the highest cluster point.
    Detailed,
}

impl LodFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            LodFlag::Smooth => "smooth",
            LodFlag::Detailed => "detailed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "smooth" => Some(LodFlag::Smooth),
            "detailed" => Some(LodFlag::Detailed),
            _ => None,
        }
    }
}

/// Planimetric and altimetric delimitation of one facade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacadeQuad {
    pub segment_id: u32,
    pub e1: Point2,
    pub e2: Point2,
    pub z_bottom: f64,
    pub z_top: f64,
    pub plane: VerticalPlane,
    pub msd: f64,
    pub lod: LodFlag,
}

impl FacadeQuad {
    pub fn length(&self) -> f64 {
        self.e1.distance(self.e2)
    }

    pub fn height(&self) -> f64 {
        self.z_top - self.z_bottom
    }

    /// Unit vector from `e1` to `e2`.
    pub fn direction(&self) -> Point2 {
        let d = self.e2 - self.e1;
        d * (1.0 / d.norm())
    }

    /// World point at abscissa `s` (from `e1`) and altitude `z`.
    pub fn point_at(&self, s: f64, z: f64) -> Point3 {
        (self.e1 + self.direction() * s).with_z(z)
    }

    /// Abscissa of `p` along `e1 -> e2`.
    pub fn abscissa(&self, p: Point3) -> f64 {
        (p.xy() - self.e1).dot(self.direction())
    }

    /// Corners ordered `(e1, bottom), (e2, bottom), (e2, top), (e1, top)`.
    pub fn vertices(&self) -> [Point3; 4] {
        [
            self.e1.with_z(self.z_bottom),
            self.e2.with_z(self.z_bottom),
            self.e2.with_z(self.z_top),
            self.e1.with_z(self.z_top),
        ]
    }

    pub fn centroid(&self) -> Point3 {
        ((self.e1 + self.e2) * 0.5).with_z(0.5 * (self.z_bottom + self.z_top))
    }
}

/// Camera-to-world rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidPose {
    pub const ORTHONORMAL_TOL: f64 = 1e-9;

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        Self::with_tolerance(rotation, translation, Self::ORTHONORMAL_TOL)
    }

    /// Validates `RᵀR = I` and `det R = +1` within `tol`.
    pub fn with_tolerance(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        tol: f64,
    ) -> Result<Self> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("pose has non-finite entries".into()));
        }
        let gram = rotation.transpose() * rotation;
        let off = (gram - Matrix3::identity()).abs().max();
        if off > tol {
            return Err(Error::InvalidInput(format!(
                "rotation is not orthonormal (max |RᵀR - I| = {off:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > tol {
            return Err(Error::InvalidInput(format!(
                "rotation determinant is {det}, expected +1"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Pose of a camera at `center` whose optical axis points at `target`.
    ///
    /// Camera axes: x right, y down, z forward. `up` must not be parallel to
    /// the viewing direction.
    pub fn look_at(center: Point3, target: Point3, up: Point3) -> Result<Self> {
        let forward = target - center;
        if forward.norm() < 1e-12 {
            return Err(Error::Degenerate("look_at target equals center".into()));
        }
        let forward = forward.normalized();
        let right = forward.cross(up);
        if right.norm() < 1e-12 {
            return Err(Error::Degenerate("look_at up is parallel to view".into()));
        }
        let right = right.normalized();
        let down = forward.cross(right);
        let rotation = Matrix3::from_columns(&[right.to_vector(), down.to_vector(), forward.to_vector()]);
        Self::new(rotation, center.to_vector())
    }

    pub fn center(&self) -> Point3 {
        Point3::from_vector(&self.translation)
    }

    pub fn world_to_camera(&self, p: Point3) -> Point3 {
        Point3::from_vector(&(self.rotation.transpose() * (p.to_vector() - self.translation)))
    }

    pub fn camera_to_world(&self, p: Point3) -> Point3 {
        Point3::from_vector(&(self.rotation * p.to_vector() + self.translation))
    }
}

/// Ideal pinhole camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub pose: RigidPose,
}

impl PinholeCamera {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        pose: RigidPose,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "focal lengths must be positive, got ({fx}, {fy})"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidInput("principal point is not finite".into()));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "image size must be positive, got {width}x{height}"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            pose,
        })
    }

    pub fn center(&self) -> Point3 {
        self.pose.center()
    }

    /// Depth of `p` along the optical axis.
    pub fn depth(&self, p: Point3) -> f64 {
        self.pose.world_to_camera(p).z
    }

    /// Continuous pixel coordinates of `p`, or `None` at or behind the camera.
    /// No frame-bounds check.
    pub fn project(&self, p: Point3) -> Option<(f64, f64)> {
        let c = self.pose.world_to_camera(p);
        if c.z <= MIN_DEPTH {
            return None;
        }
        Some((self.cx + self.fx * c.x / c.z, self.cy + self.fy * c.y / c.z))
    }

    /// World point at pixel `(u, v)` and camera-frame depth `depth`.
    pub fn back_project(&self, u: f64, v: f64, depth: f64) -> Point3 {
        let c = Point3::new((u - self.cx) / self.fx * depth, (v - self.cy) / self.fy * depth, depth);
        self.pose.camera_to_world(c)
    }

    /// Unit world-space ray through pixel `(u, v)`.
    pub fn ray(&self, u: f64, v: f64) -> (Point3, Point3) {
        let dir_cam = Point3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        let dir = Point3::from_vector(&(self.pose.rotation * dir_cam.to_vector()));
        (self.center(), dir.normalized())
    }

    /// Continuous coordinates inside `[0, width) x [0, height)`.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }

    /// Nearest pixel with round-half-up, if it lies inside the image.
    pub fn pixel_of(&self, u: f64, v: f64) -> Option<(u32, u32)> {
        let (iu, iv) = (round_half_up(u), round_half_up(v));
        if iu >= 0 && iv >= 0 && (iu as u64) < self.width as u64 && (iv as u64) < self.height as u64 {
            Some((iu as u32, iv as u32))
        } else {
            None
        }
    }
}

/// Free-function form of [`PinholeCamera::project`].
pub fn project_to_image(cam: &PinholeCamera, p: Point3) -> Option<(f64, f64)> {
    cam.project(p)
}

/// Rounds to the nearest integer with ties toward +∞.
pub fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cam(fx: f64, cx: f64, cy: f64) -> PinholeCamera {
        PinholeCamera::new(fx, fx, cx, cy, 1920, 1080, RigidPose::identity()).unwrap()
    }

    #[test]
    fn projects_on_optical_axis() {
        let c = cam(100.0, 0.0, 0.0);
        assert_eq!(c.project(Point3::new(0.0, 0.0, 5.0)), Some((0.0, 0.0)));
    }

    #[test]
    fn projects_offset_point() {
        let c = cam(100.0, 960.0, 540.0);
        let (u, v) = c.project(Point3::new(1.0, 0.0, 10.0)).unwrap();
        assert_abs_diff_eq!(u, 970.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 540.0, epsilon = 1e-12);
    }

    #[test]
    fn behind_camera_is_absent() {
        let c = cam(100.0, 960.0, 540.0);
        assert!(c.project(Point3::new(0.0, 0.0, -1.0)).is_none());
        assert!(c.project(Point3::new(0.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn plane_distance_examples() {
        let p = VerticalPlane::new(1.0, 0.0, 3.0).unwrap();
        assert_eq!(p.signed_distance(Point3::new(3.0, 7.0, 2.0)), 0.0);
        assert_eq!(p.signed_distance(Point3::new(4.0, 0.0, 0.0)), 1.0);
        let q = VerticalPlane::new(0.6, 0.8, 0.0).unwrap();
        assert_abs_diff_eq!(q.signed_distance(Point3::new(3.0, 4.0, 9.0)), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn segment_coords_examples() {
        let seg = Segment2::new(1, Point2::new(0.0, 0.0), Point2::new(10.0, 0.0)).unwrap();
        assert_eq!(seg.frame_coords(Point3::new(4.0, 1.0, 7.0)), (4.0, 1.0));
        assert_eq!(seg.frame_coords(Point3::new(-2.0, 0.0, 0.0)), (-2.0, 0.0));
        let diag = Segment2::new(2, Point2::new(0.0, 0.0), Point2::new(3.0, 4.0)).unwrap();
        let (s, t) = diag.frame_coords(Point3::new(3.0, 4.0, 0.0));
        assert_abs_diff_eq!(s, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_short_segment() {
        assert!(Segment2::new(1, Point2::new(1.0, 1.0), Point2::new(1.0, 1.0 + 1e-7)).is_err());
    }

    #[test]
    fn rejects_non_orthonormal_rotation() {
        let r = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidPose::new(r, Vector3::zeros()).is_err());
        let mirror = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidPose::new(mirror, Vector3::zeros()).is_err());
    }

    #[test]
    fn look_at_centers_target() {
        let pose = RigidPose::look_at(
            Point3::new(1.0, -2.0, 1.5),
            Point3::new(4.0, 6.0, 3.0),
            Point3::new(0.0, 0.0, 1.0),
        )
        .unwrap();
        let c = PinholeCamera::new(400.0, 400.0, 240.0, 135.0, 480, 270, pose).unwrap();
        let (u, v) = c.project(Point3::new(4.0, 6.0, 3.0)).unwrap();
        assert_abs_diff_eq!(u, 240.0, epsilon = 1e-9);
        assert_abs_diff_eq!(v, 135.0, epsilon = 1e-9);
        // world up maps to image up
        let (_, v_up) = c.project(Point3::new(4.0, 6.0, 4.0)).unwrap();
        assert!(v_up < v);
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_half_up(100.4), 100);
        assert_eq!(round_half_up(200.6), 201);
        assert_eq!(round_half_up(0.5), 1);
        assert_eq!(round_half_up(-0.5), 0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pose_strategy() -> impl Strategy<Value = RigidPose> {
            (-3.0..3.0f64, -1.0..1.0f64, -3.0..3.0f64, -50.0..50.0f64, -50.0..50.0f64, 0.0..20.0f64)
                .prop_map(|(yaw, pitch, roll, x, y, z)| {
                    let r = nalgebra::Rotation3::from_euler_angles(roll, pitch, yaw);
                    RigidPose::new(*r.matrix(), Vector3::new(x, y, z)).unwrap()
                })
        }

        proptest! {
            #[test]
            fn back_projection_round_trip(
                pose in pose_strategy(),
                u in 0.0..1920.0f64,
                v in 0.0..1080.0f64,
                depth in 0.5..200.0f64,
            ) {
                let c = PinholeCamera::new(1200.0, 1150.0, 960.0, 540.0, 1920, 1080, pose).unwrap();
                let p = c.back_project(u, v, depth);
                let (pu, pv) = c.project(p).unwrap();
                prop_assert!((pu - u).abs() < 1e-6 && (pv - v).abs() < 1e-6);
            }

            #[test]
            fn plane_distance_is_linear_along_normal(
                angle in 0.0..std::f64::consts::TAU,
                d in -100.0..100.0f64,
                x in -100.0..100.0f64,
                y in -100.0..100.0f64,
                lambda in -50.0..50.0f64,
            ) {
                let plane = VerticalPlane::new(angle.cos(), angle.sin(), d).unwrap();
                let p = Point3::new(x, y, 0.0);
                let moved = p + Point3::new(plane.nx, plane.ny, 0.0) * lambda;
                let diff = plane.signed_distance(moved) - plane.signed_distance(p) - lambda;
                prop_assert!(diff.abs() < 1e-9);
            }

            #[test]
            fn segment_coords_rigid_invariance(
                ax in -50.0..50.0f64, ay in -50.0..50.0f64,
                bx in -50.0..50.0f64, by in -50.0..50.0f64,
                px in -50.0..50.0f64, py in -50.0..50.0f64,
                theta in 0.0..std::f64::consts::TAU,
                tx in -100.0..100.0f64, ty in -100.0..100.0f64,
            ) {
                prop_assume!((ax - bx).hypot(ay - by) > 0.5);
                let seg = Segment2::new(0, Point2::new(ax, ay), Point2::new(bx, by)).unwrap();
                let (c, s) = (theta.cos(), theta.sin());
                let m = |p: Point2| Point2::new(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty);
                let moved = Segment2::new(0, m(seg.p1), m(seg.p2)).unwrap();
                let p = Point2::new(px, py);
                let (s0, t0) = seg.frame_coords(p.with_z(0.0));
                let (s1, t1) = moved.frame_coords(m(p).with_z(3.0));
                prop_assert!((s0 - s1).abs() < 1e-9 && (t0 - t1).abs() < 1e-9);
            }
        }
    }
}
