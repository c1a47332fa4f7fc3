//! Pipeline parameters and their `key = value` text form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Tunable parameters of the whole pipeline. Lengths in meters, radii and
/// widths in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Accumulation grid step.
    pub grid_step: f64,
    /// Half-width of the band around each cadastral segment.
    pub neighborhood: f64,
    pub min_cluster_pts: usize,
    /// Laser sensor height above the road.
    pub h_vehicle: f64,
    /// Sidewalk height above the road.
    pub h_curb: f64,
    /// Top-profile MSD above which the facade top is treated as detailed (m²).
    pub tau_msd: f64,
    pub occ_d_min: f64,
    pub occ_d_max: f64,
    pub occ_ground_eps: f64,
    pub occ_extent_margin: f64,
    pub occ_min_pts: usize,
    pub dilate_r: u32,
    pub erode_r: u32,
    pub feather_w: u32,
    pub ortho_gsd: f64,
    pub view_min_frac: f64,
    pub cube_half_edge: f64,
    pub cube_dilation_enabled: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            grid_step: 0.05,
            neighborhood: 1.0,
            min_cluster_pts: 500,
            h_vehicle: 2.5,
            h_curb: 0.15,
            tau_msd: 0.25,
            occ_d_min: 0.3,
            occ_d_max: 15.0,
            occ_ground_eps: 0.2,
            occ_extent_margin: 0.5,
            occ_min_pts: 30,
            dilate_r: 50,
            erode_r: 20,
            feather_w: 10,
            ortho_gsd: 0.05,
            view_min_frac: 0.05,
            cube_half_edge: 0.10,
            cube_dilation_enabled: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("grid_step", self.grid_step),
            ("neighborhood", self.neighborhood),
            ("h_vehicle", self.h_vehicle),
            ("h_curb", self.h_curb),
            ("tau_msd", self.tau_msd),
            ("occ_d_min", self.occ_d_min),
            ("occ_d_max", self.occ_d_max),
            ("occ_ground_eps", self.occ_ground_eps),
            ("occ_extent_margin", self.occ_extent_margin),
            ("ortho_gsd", self.ortho_gsd),
            ("cube_half_edge", self.cube_half_edge),
        ];
        for (key, value) in lengths {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{key} must be > 0, got {value}")));
            }
        }
        if self.dilate_r == 0 || self.erode_r == 0 {
            return Err(Error::Config("kernel radii must be >= 1".into()));
        }
        if self.erode_r >= self.dilate_r {
            return Err(Error::Config(format!(
                "erode_r ({}) must be smaller than dilate_r ({})",
                self.erode_r, self.dilate_r
            )));
        }
        if self.occ_d_min >= self.occ_d_max {
            return Err(Error::Config("occ_d_min must be smaller than occ_d_max".into()));
        }
        if !(self.view_min_frac > 0.0 && self.view_min_frac <= 1.0) {
            return Err(Error::Config(format!(
                "view_min_frac must lie in (0, 1], got {}",
                self.view_min_frac
            )));
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Missing keys keep
    /// their defaults, unknown keys are rejected.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found {line:?}")))?;
            cfg.set(key.trim(), value.trim()).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn real(key: &str, v: &str) -> std::result::Result<f64, String> {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("{key}: expected a number, found {v:?}"))
        }
        fn count<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse::<T>()
                .map_err(|_| format!("{key}: expected a non-negative integer, found {v:?}"))
        }
        match key {
            "grid_step" => self.grid_step = real(key, value)?,
            "neighborhood" => self.neighborhood = real(key, value)?,
            "min_cluster_pts" => self.min_cluster_pts = count(key, value)?,
            "h_vehicle" => self.h_vehicle = real(key, value)?,
            "h_curb" => self.h_curb = real(key, value)?,
            "tau_msd" => self.tau_msd = real(key, value)?,
            "occ_d_min" => self.occ_d_min = real(key, value)?,
            "occ_d_max" => self.occ_d_max = real(key, value)?,
            "occ_ground_eps" => self.occ_ground_eps = real(key, value)?,
            "occ_extent_margin" => self.occ_extent_margin = real(key, value)?,
            "occ_min_pts" => self.occ_min_pts = count(key, value)?,
            "dilate_r" => self.dilate_r = count(key, value)?,
            "erode_r" => self.erode_r = count(key, value)?,
            "feather_w" => self.feather_w = count(key, value)?,
            "ortho_gsd" => self.ortho_gsd = real(key, value)?,
            "view_min_frac" => self.view_min_frac = real(key, value)?,
            "cube_half_edge" => self.cube_half_edge = real(key, value)?,
            "cube_dilation_enabled" => {
                self.cube_dilation_enabled = match value {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    _ => return Err(format!("{key}: expected true or false, found {value:?}")),
                }
            }
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Canonical text form; parsing it yields an identical config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "grid_step = {}", self.grid_step);
        let _ = writeln!(s, "neighborhood = {}", self.neighborhood);
        let _ = writeln!(s, "min_cluster_pts = {}", self.min_cluster_pts);
        let _ = writeln!(s, "h_vehicle = {}", self.h_vehicle);
        let _ = writeln!(s, "h_curb = {}", self.h_curb);
        let _ = writeln!(s, "tau_msd = {}", self.tau_msd);
        let _ = writeln!(s, "occ_d_min = {}", self.occ_d_min);
        let _ = writeln!(s, "occ_d_max = {}", self.occ_d_max);
        let _ = writeln!(s, "occ_ground_eps = {}", self.occ_ground_eps);
        let _ = writeln!(s, "occ_extent_margin = {}", self.occ_extent_margin);
        let _ = writeln!(s, "occ_min_pts = {}", self.occ_min_pts);
        let _ = writeln!(s, "dilate_r = {}", self.dilate_r);
        let _ = writeln!(s, "erode_r = {}", self.erode_r);
        let _ = writeln!(s, "feather_w = {}", self.feather_w);
        let _ = writeln!(s, "ortho_gsd = {}", self.ortho_gsd);
        let _ = writeln!(s, "view_min_frac = {}", self.view_min_frac);
        let _ = writeln!(s, "cube_half_edge = {}", self.cube_half_edge);
        let _ = writeln!(s, "cube_dilation_enabled = {}", self.cube_dilation_enabled);
        s
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    PipelineConfig::parse(&text, path)
}

pub(crate) fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(head, _)| head)
}
