//! Scene description and its sectioned `key = value` text form.
//!
//! ```text
//! # globals
//! traj_start = 0 0
//! traj_direction = 1 0
//! traj_length = 20
//!
//! [facade]
//! id = 1
//! p1 = 0 6
//! p2 = 20 6
//! top = 8
//!
//! [occluder]
//! kind = sphere
//! center = 10 3 4
//! radius = 1.5
//!
//! [camera]
//! position = 10 0 1.5
//! target = 10 6 3
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point2, Point3};
use crate::ingest::strip_comment;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextureKind {
    Checkerboard,
    Stripes,
    WindowGrid,
}

/// Two-color procedural facade texture in facade coordinates `(s, h)`,
/// `h` being the height above the ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Texture {
    pub kind: TextureKind,
    /// Cell size in meters.
    pub cell: f64,
    pub palette: [[u8; 3]; 2],
}

impl Texture {
    pub fn albedo(&self, s: f64, h: f64) -> [u8; 3] {
        let c = self.cell;
        let pick = match self.kind {
            TextureKind::Checkerboard => ((s / c).floor() + (h / c).floor()).rem_euclid(2.0) != 0.0,
            TextureKind::Stripes => (s / c).floor().rem_euclid(2.0) != 0.0,
            TextureKind::WindowGrid => {
                let fs = (s / (2.0 * c)).rem_euclid(1.0);
                let fh = (h / (2.0 * c)).rem_euclid(1.0);
                (0.25..0.75).contains(&fs) && (0.25..0.75).contains(&fh)
            }
        };
        self.palette[pick as usize]
    }
}

/// Vertical textured rectangle from the ground up to `top`, optionally
/// crenellated: the top alternates between `top + a` and `top - a` every
/// half period along the facade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacadeSpec {
    pub id: u32,
    pub p1: Point2,
    pub p2: Point2,
    pub top: f64,
    pub texture: Texture,
    pub crenel_amplitude: f64,
    pub crenel_period: f64,
}

impl FacadeSpec {
    pub fn length(&self) -> f64 {
        self.p1.distance(self.p2)
    }

    pub fn direction(&self) -> Point2 {
        let d = self.p2 - self.p1;
        d * (1.0 / d.norm())
    }

    /// Top altitude at abscissa `s`.
    pub fn top_at(&self, s: f64) -> f64 {
        if self.crenel_amplitude <= 0.0 {
            return self.top;
        }
        let half = 0.5 * self.crenel_period;
        if (s / half).floor().rem_euclid(2.0) == 0.0 {
            self.top + self.crenel_amplitude
        } else {
            self.top - self.crenel_amplitude
        }
    }

    /// Highest altitude reached by the facade.
    pub fn max_top(&self) -> f64 {
        if self.crenel_amplitude > 0.0 {
            self.top + self.crenel_amplitude
        } else {
            self.top
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Box { min: Point3, max: Point3 },
    Sphere { center: Point3, radius: f64 },
    /// Vertical cylinder with flat caps.
    Cylinder { center: Point2, radius: f64, z_min: f64, z_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occluder {
    pub shape: Shape,
    pub albedo: [u8; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaserSides {
    Left,
    Right,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CadastreNoise {
    /// Each endpoint moved along the segment normal.
    Normal,
    /// Each endpoint moved independently in x and y.
    Isotropic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraSpec {
    pub position: Point3,
    pub target: Point3,
    pub hfov_deg: f64,
    /// Per-channel multiplicative gain applied to rendered colors.
    pub gain: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub ground_z: f64,
    pub ground_albedo: [u8; 3],
    pub sky: [u8; 3],
    /// Sidewalk height: true facade bottoms sit this far above the road.
    pub curb_height: f64,
    pub traj_start: Point2,
    pub traj_direction: Point2,
    pub traj_length: f64,
    pub frame_spacing: f64,
    pub sensor_height: f64,
    pub fan_min_deg: f64,
    pub fan_max_deg: f64,
    pub rays_per_frame: usize,
    pub laser_sides: LaserSides,
    pub laser_noise: f64,
    pub cadastre_noise: f64,
    pub cadastre_noise_mode: CadastreNoise,
    pub image_width: u32,
    pub image_height: u32,
    pub ortho_gsd: f64,
    pub facades: Vec<FacadeSpec>,
    pub occluders: Vec<Occluder>,
    pub cameras: Vec<CameraSpec>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            ground_z: 0.0,
            ground_albedo: [110, 110, 110],
            sky: [170, 200, 230],
            curb_height: 0.15,
            traj_start: Point2::new(0.0, 0.0),
            traj_direction: Point2::new(1.0, 0.0),
            traj_length: 20.0,
            frame_spacing: 0.2,
            sensor_height: 2.5,
            fan_min_deg: -20.0,
            fan_max_deg: 60.0,
            rays_per_frame: 201,
            laser_sides: LaserSides::Left,
            laser_noise: 0.03,
            cadastre_noise: 0.0,
            cadastre_noise_mode: CadastreNoise::Normal,
            image_width: 480,
            image_height: 270,
            ortho_gsd: 0.05,
            facades: Vec::new(),
            occluders: Vec::new(),
            cameras: Vec::new(),
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.facades.is_empty() {
            return bad("scene has no facades".into());
        }
        if !(self.frame_spacing > 0.0) || !(self.traj_length >= 0.0) {
            return bad("frame_spacing must be > 0 and traj_length >= 0".into());
        }
        if self.traj_direction.norm() < 1e-12 {
            return bad("traj_direction must be non-zero".into());
        }
        if self.rays_per_frame < 2 || !(self.fan_max_deg > self.fan_min_deg) {
            return bad("laser fan needs >= 2 rays and fan_max_deg > fan_min_deg".into());
        }
        if !(self.laser_noise >= 0.0 && self.cadastre_noise >= 0.0) {
            return bad("noise amplitudes must be >= 0".into());
        }
        if self.image_width == 0 || self.image_height == 0 || !(self.ortho_gsd > 0.0) {
            return bad("image size and ortho_gsd must be positive".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for f in &self.facades {
            if !ids.insert(f.id) {
                return bad(format!("duplicate facade id {}", f.id));
            }
            if f.length() < 1e-6 {
                return bad(format!("facade {} has zero length", f.id));
            }
            if !(f.top - f.crenel_amplitude.max(0.0) > self.ground_z + self.curb_height) {
                return bad(format!("facade {} does not rise above the curb", f.id));
            }
            if f.crenel_amplitude > 0.0 && !(f.crenel_period > 0.0) {
                return bad(format!("facade {} needs a positive crenel_period", f.id));
            }
            if !(f.texture.cell > 0.0) {
                return bad(format!("facade {} texture cell must be > 0", f.id));
            }
        }
        for c in &self.cameras {
            if !(c.hfov_deg > 0.0 && c.hfov_deg < 180.0) {
                return bad(format!("camera hfov {} out of (0, 180)", c.hfov_deg));
            }
        }
        Ok(())
    }

    pub fn traj_unit(&self) -> Point2 {
        self.traj_direction * (1.0 / self.traj_direction.norm())
    }

    /// Trajectory positions of all frames.
    pub fn frame_positions(&self) -> Vec<Point2> {
        let n = (self.traj_length / self.frame_spacing + 1e-9).floor() as usize + 1;
        let dir = self.traj_unit();
        (0..n)
            .map(|k| self.traj_start + dir * (k as f64 * self.frame_spacing))
            .collect()
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let sections = split_sections(text, origin)?;
        let mut scene = SceneSpec::default();
        for sec in sections {
            match sec.name.as_str() {
                "" => sec.apply_globals(&mut scene)?,
                "facade" => scene.facades.push(sec.facade()?),
                "occluder" => scene.occluders.push(sec.occluder()?),
                "camera" => scene.cameras.push(sec.camera()?),
                other => return Err(sec.err(sec.line, format!("unknown section [{other}]"))),
            }
        }
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

struct Section<'a> {
    name: String,
    line: usize,
    origin: &'a Path,
    entries: BTreeMap<String, (String, usize)>,
}

fn split_sections<'a>(text: &str, origin: &'a Path) -> Result<Vec<Section<'a>>> {
    let mut out = vec![Section {
        name: String::new(),
        line: 0,
        origin,
        entries: BTreeMap::new(),
    }];
    for (idx, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| Error::Parse {
            path: origin.to_path_buf(),
            line: idx + 1,
            message: m,
        };
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            out.push(Section {
                name: name.trim().to_string(),
                line: idx + 1,
                origin,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, found {line:?}")))?;
        let sec = out.last_mut().expect("at least the global section");
        if sec
            .entries
            .insert(k.trim().to_string(), (v.trim().to_string(), idx + 1))
            .is_some()
        {
            return Err(err(format!("duplicate key {:?}", k.trim())));
        }
    }
    Ok(out)
}

impl Section<'_> {
    fn err(&self, line: usize, message: String) -> Error {
        Error::Parse {
            path: self.origin.to_path_buf(),
            line,
            message,
        }
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn numbers<const N: usize>(&mut self, key: &str) -> Result<Option<[f64; N]>> {
        let Some((v, line)) = self.take(key) else {
            return Ok(None);
        };
        let parsed: Vec<f64> = v
            .split_whitespace()
            .map(|t| t.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| self.err(line, format!("{key}: bad number in {v:?}")))?;
        let arr: [f64; N] = parsed
            .try_into()
            .map_err(|_| self.err(line, format!("{key}: expected {N} numbers, found {v:?}")))?;
        Ok(Some(arr))
    }

    fn real(&mut self, key: &str) -> Result<Option<f64>> {
        Ok(self.numbers::<1>(key)?.map(|[x]| x))
    }

    fn color(&mut self, key: &str) -> Result<Option<[u8; 3]>> {
        let line = self.entries.get(key).map(|e| e.1).unwrap_or(self.line);
        match self.numbers::<3>(key)? {
            None => Ok(None),
            Some(c) if c.iter().all(|&x| (0.0..=255.0).contains(&x) && x.fract() == 0.0) => {
                Ok(Some(c.map(|x| x as u8)))
            }
            Some(_) => Err(self.err(line, format!("{key}: colors are integers in 0..=255"))),
        }
    }

    fn word(&mut self, key: &str) -> Option<(String, usize)> {
        self.take(key)
    }

    fn required<T>(&self, key: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| self.err(self.line, format!("[{}] is missing {key:?}", self.name)))
    }

    fn finish(self) -> Result<()> {
        if let Some((k, (_, line))) = self.entries.into_iter().next() {
            return Err(Error::Parse {
                path: self.origin.to_path_buf(),
                line,
                message: format!("unknown key {k:?}"),
            });
        }
        Ok(())
    }

    fn apply_globals(mut self, s: &mut SceneSpec) -> Result<()> {
        if let Some(v) = self.real("ground_z")? {
            s.ground_z = v;
        }
        if let Some(v) = self.color("ground_albedo")? {
            s.ground_albedo = v;
        }
        if let Some(v) = self.color("sky")? {
            s.sky = v;
        }
        if let Some(v) = self.real("curb_height")? {
            s.curb_height = v;
        }
        if let Some([x, y]) = self.numbers("traj_start")? {
            s.traj_start = Point2::new(x, y);
        }
        if let Some([x, y]) = self.numbers("traj_direction")? {
            s.traj_direction = Point2::new(x, y);
        }
        if let Some(v) = self.real("traj_length")? {
            s.traj_length = v;
        }
        if let Some(v) = self.real("frame_spacing")? {
            s.frame_spacing = v;
        }
        if let Some(v) = self.real("sensor_height")? {
            s.sensor_height = v;
        }
        if let Some(v) = self.real("fan_min_deg")? {
            s.fan_min_deg = v;
        }
        if let Some(v) = self.real("fan_max_deg")? {
            s.fan_max_deg = v;
        }
        if let Some(v) = self.real("rays_per_frame")? {
            s.rays_per_frame = v as usize;
        }
        if let Some((v, line)) = self.word("laser_sides") {
            s.laser_sides = match v.as_str() {
                "left" => LaserSides::Left,
                "right" => LaserSides::Right,
                "both" => LaserSides::Both,
                _ => return Err(self.err(line, format!("laser_sides: unknown value {v:?}"))),
            };
        }
        if let Some(v) = self.real("laser_noise")? {
            s.laser_noise = v;
        }
        if let Some(v) = self.real("cadastre_noise")? {
            s.cadastre_noise = v;
        }
        if let Some((v, line)) = self.word("cadastre_noise_mode") {
            s.cadastre_noise_mode = match v.as_str() {
                "normal" => CadastreNoise::Normal,
                "isotropic" => CadastreNoise::Isotropic,
                _ => return Err(self.err(line, format!("cadastre_noise_mode: unknown value {v:?}"))),
            };
        }
        if let Some(v) = self.real("image_width")? {
            s.image_width = v as u32;
        }
        if let Some(v) = self.real("image_height")? {
            s.image_height = v as u32;
        }
        if let Some(v) = self.real("ortho_gsd")? {
            s.ortho_gsd = v;
        }
        self.finish()
    }

    fn facade(mut self) -> Result<FacadeSpec> {
        let id = self.real("id")?;
        let id = self.required("id", id)?;
        let p1 = self.numbers::<2>("p1")?;
        let p1 = self.required("p1", p1)?;
        let p2 = self.numbers::<2>("p2")?;
        let p2 = self.required("p2", p2)?;
        let top = self.real("top")?;
        let top = self.required("top", top)?;
        let kind = match self.word("texture") {
            None => TextureKind::Checkerboard,
            Some((v, line)) => match v.as_str() {
                "checkerboard" => TextureKind::Checkerboard,
                "stripes" => TextureKind::Stripes,
                "window-grid" => TextureKind::WindowGrid,
                _ => return Err(self.err(line, format!("texture: unknown kind {v:?}"))),
            },
        };
        let cell = self.real("cell")?.unwrap_or(0.5);
        let palette = match self.numbers::<6>("palette")? {
            None => [[200, 170, 140], [90, 80, 70]],
            Some(p) => {
                if !p.iter().all(|&x| (0.0..=255.0).contains(&x) && x.fract() == 0.0) {
                    return Err(self.err(self.line, "palette: colors are integers in 0..=255".into()));
                }
                [[p[0] as u8, p[1] as u8, p[2] as u8], [p[3] as u8, p[4] as u8, p[5] as u8]]
            }
        };
        let crenel_amplitude = self.real("crenel_amplitude")?.unwrap_or(0.0);
        let crenel_period = self.real("crenel_period")?.unwrap_or(2.0);
        self.finish()?;
        if id < 0.0 || id.fract() != 0.0 {
            return Err(Error::InvalidInput(format!("facade id {id} is not a non-negative integer")));
        }
        Ok(FacadeSpec {
            id: id as u32,
            p1: Point2::new(p1[0], p1[1]),
            p2: Point2::new(p2[0], p2[1]),
            top,
            texture: Texture {
                kind,
                cell,
                palette,
            },
            crenel_amplitude,
            crenel_period,
        })
    }

    fn occluder(mut self) -> Result<Occluder> {
        let (kind, kind_line) = self
            .word("kind")
            .ok_or_else(|| self.err(self.line, "[occluder] is missing \"kind\"".into()))?;
        let albedo = self.color("albedo")?.unwrap_or([60, 120, 50]);
        let shape = match kind.as_str() {
            "box" => {
                let min = self.numbers::<3>("min")?;
                let min = self.required("min", min)?;
                let max = self.numbers::<3>("max")?;
                let max = self.required("max", max)?;
                if !(0..3).all(|k| max[k] > min[k]) {
                    return Err(self.err(self.line, "box: max must exceed min on every axis".into()));
                }
                Shape::Box {
                    min: Point3::new(min[0], min[1], min[2]),
                    max: Point3::new(max[0], max[1], max[2]),
                }
            }
            "sphere" => {
                let c = self.numbers::<3>("center")?;
                let c = self.required("center", c)?;
                let r = self.real("radius")?;
                let radius = self.required("radius", r)?;
                Shape::Sphere {
                    center: Point3::new(c[0], c[1], c[2]),
                    radius,
                }
            }
            "cylinder" => {
                let c = self.numbers::<2>("center")?;
                let c = self.required("center", c)?;
                let r = self.real("radius")?;
                let radius = self.required("radius", r)?;
                let lo = self.real("z_min")?;
                let z_min = self.required("z_min", lo)?;
                let hi = self.real("z_max")?;
                let z_max = self.required("z_max", hi)?;
                if !(z_max > z_min) {
                    return Err(self.err(self.line, "cylinder: z_max must exceed z_min".into()));
                }
                Shape::Cylinder {
                    center: Point2::new(c[0], c[1]),
                    radius,
                    z_min,
                    z_max,
                }
            }
            _ => return Err(self.err(kind_line, format!("kind: unknown occluder {kind:?}"))),
        };
        if let Shape::Sphere { radius, .. } | Shape::Cylinder { radius, .. } = shape {
            if !(radius > 0.0) {
                return Err(self.err(self.line, "radius must be > 0".into()));
            }
        }
        self.finish()?;
        Ok(Occluder { shape, albedo })
    }

    fn camera(mut self) -> Result<CameraSpec> {
        let p = self.numbers::<3>("position")?;
        let p = self.required("position", p)?;
        let t = self.numbers::<3>("target")?;
        let t = self.required("target", t)?;
        let hfov_deg = self.real("hfov_deg")?.unwrap_or(90.0);
        let gain = self.numbers::<3>("gain")?.unwrap_or([1.0; 3]);
        self.finish()?;
        Ok(CameraSpec {
            position: Point3::new(p[0], p[1], p[2]),
            target: Point3::new(t[0], t[1], t[2]),
            hfov_deg,
            gain,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENE: &str = "
        # one facade, one tree
        traj_length = 12
        laser_sides = left
        image_width = 96
        image_height = 54

        [facade]
        id = 4
        p1 = 0 6
        p2 = 12 6
        top = 7
        texture = window-grid
        palette = 200 180 150 40 50 70

        [occluder]
        kind = sphere
        center = 6 3 4
        radius = 1.2

        [occluder]
        kind = cylinder
        center = 6 3
        radius = 0.2
        z_min = 0
        z_max = 3.5

        [camera]
        position = 6 0 1.5
        target = 6 6 3
        gain = 1 1.2 1
    ";

    fn parse(text: &str) -> Result<SceneSpec> {
        SceneSpec::parse(text, Path::new("scene.txt"))
    }

    #[test]
    fn parses_sections() {
        let s = parse(SCENE).unwrap();
        assert_eq!(s.facades.len(), 1);
        assert_eq!(s.facades[0].id, 4);
        assert_eq!(s.facades[0].texture.kind, TextureKind::WindowGrid);
        assert_eq!(s.occluders.len(), 2);
        assert_eq!(s.cameras[0].gain, [1.0, 1.2, 1.0]);
        assert_eq!((s.image_width, s.image_height), (96, 54));
        assert_eq!(s.rays_per_frame, 201);
        assert_eq!(s.frame_positions().len(), 61);
    }

    #[test]
    fn zero_facades_is_an_error() {
        assert!(parse("traj_length = 5\n").is_err());
    }

    #[test]
    fn unknown_keys_and_sections_are_errors() {
        assert!(matches!(parse(&format!("{SCENE}\n[camera]\nposition = 0 0 1\ntarget = 1 0 1\nzoom = 2\n")), Err(Error::Parse { .. })));
        assert!(matches!(parse(&format!("{SCENE}\n[lamp]\n")), Err(Error::Parse { .. })));
    }

    #[test]
    fn checkerboard_phase() {
        let t = Texture {
            kind: TextureKind::Checkerboard,
            cell: 0.5,
            palette: [[1, 1, 1], [2, 2, 2]],
        };
        assert_eq!(t.albedo(0.1, 0.1), [1, 1, 1]);
        assert_eq!(t.albedo(0.6, 0.1), [2, 2, 2]);
        assert_eq!(t.albedo(0.6, 0.6), [1, 1, 1]);
        assert_eq!(t.albedo(-0.1, 0.1), [2, 2, 2]);
    }

    #[test]
    fn crenellation_profile() {
        let mut f = parse(SCENE).unwrap().facades[0];
        f.crenel_amplitude = 1.0;
        f.crenel_period = 2.0;
        assert_eq!(f.top_at(0.5), 8.0);
        assert_eq!(f.top_at(1.5), 6.0);
        assert_eq!(f.top_at(2.5), 8.0);
        assert_eq!(f.max_top(), 8.0);
    }
}
