//! Ray casting against the analytic scene.

use super::scene::{FacadeSpec, SceneSpec, Shape};
use crate::geometry::{Point2, Point3};

/// Hits closer than this are ignored.
pub const RAY_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceId {
    Ground,
    /// Index into `SceneSpec::facades`.
    Facade(usize),
    /// Index into `SceneSpec::occluders`.
    Occluder(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Point3,
    pub surface: SurfaceId,
}

/// Which surfaces a ray may hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visibility {
    All,
    OccludersOnly,
}

fn facade_hit(f: &FacadeSpec, ground_z: f64, o: Point3, d: Point3) -> Option<f64> {
    let dir = f.direction();
    let n = Point2::new(-dir.y, dir.x);
    let denom = n.dot(d.xy());
    if denom.abs() < 1e-15 {
        return None;
    }
    let t = n.dot(f.p1 - o.xy()) / denom;
    if t <= RAY_EPS {
        return None;
    }
    let h = o + d * t;
    let s = (h.xy() - f.p1).dot(dir);
    (s >= 0.0 && s <= f.length() && h.z >= ground_z && h.z <= f.top_at(s)).then_some(t)
}

fn sphere_hit(c: Point3, r: f64, o: Point3, d: Point3) -> Option<f64> {
    let oc = o - c;
    let b = oc.dot(d);
    let cc = oc.dot(oc) - r * r;
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    [-b - sq, -b + sq].into_iter().find(|&t| t > RAY_EPS)
}

fn box_hit(min: Point3, max: Point3, o: Point3, d: Point3) -> Option<f64> {
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for (o, d, lo, hi) in [(o.x, d.x, min.x, max.x), (o.y, d.y, min.y, max.y), (o.z, d.z, min.z, max.z)] {
        if d.abs() < 1e-15 {
            if o < lo || o > hi {
                return None;
            }
            continue;
        }
        let (a, b) = ((lo - o) / d, (hi - o) / d);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    if t0 > t1 {
        return None;
    }
    [t0, t1].into_iter().find(|&t| t > RAY_EPS)
}

fn cylinder_hit(c: Point2, r: f64, z_min: f64, z_max: f64, o: Point3, d: Point3) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut keep = |t: f64| {
        if t > RAY_EPS && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    let oc = o.xy() - c;
    let dxy = d.xy();
    let a = dxy.dot(dxy);
    if a > 1e-15 {
        let b = oc.dot(dxy);
        let cc = oc.dot(oc) - r * r;
        let disc = b * b - a * cc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-b - sq) / a, (-b + sq) / a] {
                let z = o.z + d.z * t;
                if z >= z_min && z <= z_max {
                    keep(t);
                }
            }
        }
    }
    if d.z.abs() > 1e-15 {
        for zc in [z_min, z_max] {
            let t = (zc - o.z) / d.z;
            let p = o.xy() + dxy * t;
            if (p - c).norm() <= r {
                keep(t);
            }
        }
    }
    best
}

/// Intersection of a ray with one occluder shape.
pub fn shape_hit(shape: &Shape, o: Point3, d: Point3) -> Option<f64> {
    match *shape {
        Shape::Box { min, max } => box_hit(min, max, o, d),
        Shape::Sphere { center, radius } => sphere_hit(center, radius, o, d),
        Shape::Cylinder {
            center,
            radius,
            z_min,
            z_max,
        } => cylinder_hit(center, radius, z_min, z_max, o, d),
    }
}

/// Nearest surface hit by the ray `o + t d`, `t > RAY_EPS`. `d` need not be
/// unit length; `t` is in units of `|d|`.
pub fn ray_cast(scene: &SceneSpec, o: Point3, d: Point3, vis: Visibility) -> Option<Hit> {
    let mut best: Option<(f64, SurfaceId)> = None;
    let mut consider = |t: Option<f64>, id: SurfaceId| {
        if let Some(t) = t {
            if best.is_none_or(|(b, _)| t < b) {
                best = Some((t, id));
            }
        }
    };
    for (k, occ) in scene.occluders.iter().enumerate() {
        consider(shape_hit(&occ.shape, o, d), SurfaceId::Occluder(k));
    }
    if vis == Visibility::All {
        for (k, f) in scene.facades.iter().enumerate() {
            consider(facade_hit(f, scene.ground_z, o, d), SurfaceId::Facade(k));
        }
        if d.z.abs() > 1e-15 {
            let t = (scene.ground_z - o.z) / d.z;
            consider((t > RAY_EPS).then_some(t), SurfaceId::Ground);
        }
    }
    best.map(|(t, surface)| Hit {
        t,
        point: o + d * t,
        surface,
    })
}

/// Surface color at a hit, before camera gain.
pub fn albedo(scene: &SceneSpec, hit: &Hit) -> [u8; 3] {
    match hit.surface {
        SurfaceId::Ground => scene.ground_albedo,
        SurfaceId::Occluder(k) => scene.occluders[k].albedo,
        SurfaceId::Facade(k) => {
            let f = &scene.facades[k];
            let s = (hit.point.xy() - f.p1).dot(f.direction());
            f.texture.albedo(s, hit.point.z - scene.ground_z)
        }
    }
}
