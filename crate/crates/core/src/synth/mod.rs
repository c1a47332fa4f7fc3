//! Synthetic street scenes: laser sweeps, camera views and ground truth.
//!
//! Everything is deterministic for a given scene and seed. Randomness is
//! confined to the laser range noise and the cadastre perturbation, each
//! drawn from its own ChaCha stream.

mod raycast;
mod scene;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

pub use raycast::{albedo, ray_cast, shape_hit, Hit, SurfaceId, Visibility, RAY_EPS};
pub use scene::{
    CadastreNoise, CameraSpec, FacadeSpec, LaserSides, Occluder, SceneSpec, Shape, Texture, TextureKind,
};

use crate::error::{Error, Result};
use crate::geometry::{FacadeQuad, LodFlag, PinholeCamera, Point2, Point3, RigidPose, Segment2, VerticalPlane};
use crate::ingest::{
    format_cadastre, format_camera_line, format_frames, format_points, format_quads, write_gray, write_image,
    LaserFrame, PointRecord, RgbImage,
};
use crate::masking::BinaryMask;
use crate::texturing::OrthoGrid;

/// Laser returns farther than this are dropped.
pub const MAX_RANGE: f64 = 100.0;

const LASER_STREAM: u64 = 1;
const CADASTRE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointLabel {
    Facade,
    Ground,
    Occluder,
    Other,
}

impl PointLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PointLabel::Facade => "facade",
            PointLabel::Ground => "ground",
            PointLabel::Occluder => "occluder",
            PointLabel::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "facade" => PointLabel::Facade,
            "ground" => PointLabel::Ground,
            "occluder" => PointLabel::Occluder,
            "other" => PointLabel::Other,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaserScan {
    pub points: Vec<PointRecord>,
    pub labels: Vec<PointLabel>,
    pub frames: Vec<LaserFrame>,
}

fn label_of(surface: SurfaceId) -> PointLabel {
    match surface {
        SurfaceId::Ground => PointLabel::Ground,
        SurfaceId::Facade(_) => PointLabel::Facade,
        SurfaceId::Occluder(_) => PointLabel::Occluder,
    }
}

/// Sweeps a vertical laser fan perpendicular to the trajectory at every
/// frame position. With both sides enabled each position yields two frames,
/// left first.
pub fn simulate_laser(scene: &SceneSpec, seed: u64) -> Result<LaserScan> {
    scene.validate()?;
    let dir = scene.traj_unit();
    let left = Point2::new(-dir.y, dir.x);
    let sides: &[Point2] = match scene.laser_sides {
        LaserSides::Left => &[left],
        LaserSides::Right => &[Point2::new(dir.y, -dir.x)],
        LaserSides::Both => &[left, Point2::new(dir.y, -dir.x)],
    };
    let n = scene.rays_per_frame;
    let step = (scene.fan_max_deg - scene.fan_min_deg) / (n - 1) as f64;
    let fan: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let a = (scene.fan_min_deg + j as f64 * step).to_radians();
            (a.cos(), a.sin())
        })
        .collect();

    let mut frames = Vec::new();
    let mut rays = Vec::new();
    for (k, pos) in scene.frame_positions().into_iter().enumerate() {
        let sensor = pos.with_z(scene.ground_z + scene.sensor_height);
        for (side_idx, side) in sides.iter().enumerate() {
            let frame_id = u32::try_from(k * sides.len() + side_idx)
                .map_err(|_| Error::InvalidInput("too many laser frames".into()))?;
            frames.push(LaserFrame {
                frame_id,
                sensor_pos: sensor,
            });
            for &(c, s) in &fan {
                rays.push((frame_id, sensor, Point3::new(side.x * c, side.y * c, s)));
            }
        }
    }

    let hits: Vec<Option<(u32, Hit)>> = rays
        .par_iter()
        .map(|&(fid, o, d)| {
            ray_cast(scene, o, d, Visibility::All)
                .filter(|h| h.t <= MAX_RANGE)
                .map(|h| (fid, h))
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(LASER_STREAM);
    let noise = Normal::new(0.0, scene.laser_noise).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (frame_id, h) in hits.into_iter().flatten() {
        let jitter = Point3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
        points.push(PointRecord {
            point: h.point + jitter,
            frame_id,
        });
        labels.push(label_of(h.surface));
    }
    Ok(LaserScan {
        points,
        labels,
        frames,
    })
}

/// Cadastral footprints of the facades, perturbed by `cadastre_noise`.
pub fn simulate_cadastre(scene: &SceneSpec, seed: u64) -> Result<Vec<Segment2>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(CADASTRE_STREAM);
    let a = scene.cadastre_noise;
    let draw = |rng: &mut ChaCha8Rng| if a > 0.0 { rng.gen_range(-a..=a) } else { 0.0 };
    scene
        .facades
        .iter()
        .map(|f| {
            let dir = f.direction();
            let n = Point2::new(-dir.y, dir.x);
            let (p1, p2) = match scene.cadastre_noise_mode {
                CadastreNoise::Normal => (f.p1 + n * draw(&mut rng), f.p2 + n * draw(&mut rng)),
                CadastreNoise::Isotropic => (
                    f.p1 + Point2::new(draw(&mut rng), draw(&mut rng)),
                    f.p2 + Point2::new(draw(&mut rng), draw(&mut rng)),
                ),
            };
            Segment2::new(f.id, p1, p2)
        })
        .collect()
}

/// Pinhole camera for a camera spec at the scene's image size. The principal
/// point is the image center and pixels are square.
pub fn build_camera(scene: &SceneSpec, spec: &CameraSpec) -> Result<PinholeCamera> {
    let (w, h) = (scene.image_width, scene.image_height);
    let f = 0.5 * w as f64 / (0.5 * spec.hfov_deg.to_radians()).tan();
    let pose = RigidPose::look_at(spec.position, spec.target, Point3::new(0.0, 0.0, 1.0))?;
    PinholeCamera::new(f, f, 0.5 * w as f64, 0.5 * h as f64, w, h, pose)
}

fn shade(c: [u8; 3], gain: [f64; 3]) -> [u8; 3] {
    let mut out = [0u8; 3];
    for k in 0..3 {
        out[k] = (c[k] as f64 * gain[k] + 0.5).floor().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Renders the scene through `cam`, one ray per pixel center.
pub fn render_view(scene: &SceneSpec, cam: &PinholeCamera, gain: [f64; 3]) -> RgbImage {
    let mut img = RgbImage::new(cam.width, cam.height);
    let row_len = cam.width as usize * 3;
    img.data.par_chunks_mut(row_len).enumerate().for_each(|(y, row)| {
        for x in 0..cam.width as usize {
            let (o, d) = cam.ray(x as f64, y as f64);
            let c = match ray_cast(scene, o, d, Visibility::All) {
                Some(h) => albedo(scene, &h),
                None => scene.sky,
            };
            row[x * 3..x * 3 + 3].copy_from_slice(&shade(c, gain));
        }
    });
    img
}

/// Pixels whose center ray hits an occluder, ignoring facades and ground.
pub fn occluder_silhouette(scene: &SceneSpec, cam: &PinholeCamera) -> BinaryMask {
    let w = cam.width as usize;
    let bits: Vec<bool> = (0..w * cam.height as usize)
        .into_par_iter()
        .map(|i| {
            let (o, d) = cam.ray((i % w) as f64, (i / w) as f64);
            ray_cast(scene, o, d, Visibility::OccludersOnly).is_some()
        })
        .collect();
    BinaryMask::from_fn(cam.width, cam.height, |x, y| bits[y as usize * w + x as usize])
}

/// True facade quads, oriented toward the middle of the trajectory.
pub fn true_quads(scene: &SceneSpec) -> Result<Vec<FacadeQuad>> {
    let mid = scene.traj_start + scene.traj_unit() * (0.5 * scene.traj_length);
    scene
        .facades
        .iter()
        .map(|f| {
            let dir = f.direction();
            let mut plane = VerticalPlane::through(Point2::new(-dir.y, dir.x), f.p1)?;
            if plane.signed_distance_2d(mid) < 0.0 {
                plane = plane.flipped();
            }
            Ok(FacadeQuad {
                segment_id: f.id,
                e1: f.p1,
                e2: f.p2,
                z_bottom: scene.ground_z + scene.curb_height,
                z_top: f.max_top(),
                plane,
                msd: 0.0,
                lod: if f.crenel_amplitude > 0.0 {
                    LodFlag::Detailed
                } else {
                    LodFlag::Smooth
                },
            })
        })
        .collect()
}

/// Facade appearance sampled at the pixel centers of `grid`. Each center is
/// projected onto the true facade `facade_id`; centers off the facade get
/// the sky color.
pub fn truth_texture(scene: &SceneSpec, facade_id: u32, grid: &OrthoGrid) -> Result<RgbImage> {
    let f = scene
        .facades
        .iter()
        .find(|f| f.id == facade_id)
        .ok_or_else(|| Error::Reference(format!("no facade {facade_id} in scene")))?;
    let dir = f.direction();
    let mut img = RgbImage::new(grid.cols, grid.rows);
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            let p = grid.world_point(col, row);
            let s = (p.xy() - f.p1).dot(dir);
            let on = s >= 0.0 && s <= f.length() && p.z >= scene.ground_z && p.z <= f.top_at(s);
            let c = if on {
                f.texture.albedo(s, p.z - scene.ground_z)
            } else {
                scene.sky
            };
            img.put(col, row, c);
        }
    }
    Ok(img)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub camera: PinholeCamera,
    pub image: RgbImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub scan: LaserScan,
    pub cadastre: Vec<Segment2>,
    pub views: Vec<CameraView>,
}

pub fn simulate(scene: &SceneSpec, seed: u64) -> Result<Simulation> {
    let scan = simulate_laser(scene, seed)?;
    let cadastre = simulate_cadastre(scene, seed)?;
    let views = scene
        .cameras
        .iter()
        .map(|spec| {
            let camera = build_camera(scene, spec)?;
            Ok(CameraView {
                image: render_view(scene, &camera, spec.gain),
                camera,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Simulation {
        scan,
        cadastre,
        views,
    })
}

/// Names of the files written by [`write_simulation`].
pub mod layout {
    pub const POINTS: &str = "points.txt";
    pub const FRAMES: &str = "frames.txt";
    pub const CADASTRE: &str = "cadastre.txt";
    pub const CAMERAS: &str = "cameras.txt";
    pub const TRUTH_DIR: &str = "truth";
    pub const TRUTH_SCENE: &str = "scene.txt";
    pub const TRUTH_QUADS: &str = "quads.txt";
    pub const TRUTH_LABELS: &str = "labels.txt";

    pub fn image(cam: usize) -> String {
        format!("images/cam_{cam:03}.ppm")
    }

    pub fn truth_texture(facade: u32) -> String {
        format!("textures/facade_{facade}.ppm")
    }

    pub fn silhouette(cam: usize) -> String {
        format!("silhouettes/cam_{cam:03}.pgm")
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the dataset files and a `truth/` directory holding the scene text,
/// true quads, point labels, true textures and occluder silhouettes.
pub fn write_simulation(scene: &SceneSpec, scene_text: &str, sim: &Simulation, out: &Path) -> Result<()> {
    write_text(&out.join(layout::POINTS), &format_points(&sim.scan.points))?;
    write_text(&out.join(layout::FRAMES), &format_frames(&sim.scan.frames))?;
    write_text(&out.join(layout::CADASTRE), &format_cadastre(&sim.cadastre))?;
    let mut cams = String::new();
    for (k, v) in sim.views.iter().enumerate() {
        let rel = layout::image(k);
        let path = out.join(&rel);
        fs::create_dir_all(path.parent().expect("image path has a parent"))
            .map_err(|e| Error::io(out, e))?;
        write_image(&v.image, &path)?;
        let _ = writeln!(cams, "{}", format_camera_line(k as u32, &rel, &v.camera));
    }
    write_text(&out.join(layout::CAMERAS), &cams)?;

    let truth = out.join(layout::TRUTH_DIR);
    write_text(&truth.join(layout::TRUTH_SCENE), scene_text)?;
    let quads = true_quads(scene)?;
    write_text(&truth.join(layout::TRUTH_QUADS), &format_quads(&quads))?;
    let mut labels = String::with_capacity(sim.scan.labels.len() * 8);
    for l in &sim.scan.labels {
        labels.push_str(l.as_str());
        labels.push('\n');
    }
    write_text(&truth.join(layout::TRUTH_LABELS), &labels)?;
    for q in &quads {
        let grid = OrthoGrid::for_quad(q, scene.ortho_gsd)?;
        let path = truth.join(layout::truth_texture(q.segment_id));
        fs::create_dir_all(path.parent().expect("texture path has a parent")).map_err(|e| Error::io(&truth, e))?;
        write_image(&truth_texture(scene, q.segment_id, &grid)?, &path)?;
    }
    for (k, v) in sim.views.iter().enumerate() {
        let path = truth.join(layout::silhouette(k));
        fs::create_dir_all(path.parent().expect("silhouette path has a parent")).map_err(|e| Error::io(&truth, e))?;
        write_gray(&occluder_silhouette(scene, &v.camera).to_gray(), &path)?;
    }
    Ok(())
}

/// Reads a labels file written by [`write_simulation`].
pub fn read_labels(path: &Path) -> Result<Vec<PointLabel>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            PointLabel::parse(l.trim()).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("unknown label {:?}", l.trim()),
            })
        })
        .collect()
}
