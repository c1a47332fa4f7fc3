//! End-to-end run: dataset files in, facade models, masks and textures out.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use facademap_core::accumulation::{build_accumulation_map, split_hyper_points};
use facademap_core::extract::extract_facade_clusters;
use facademap_core::fit::fit_facade;
use facademap_core::ingest::{format_quads, load_dataset, Dataset, PipelineConfig};
use facademap_core::masking::occlusion_masks;
use facademap_core::occlusion::{cube_dilate, detect_occluding_points, PointSource};
use facademap_core::texturing::{export_hole_map, gray_world_balance, mosaic, rectify_view, select_views, OrthoGrid};
use facademap_core::{FacadeFit, OccluderSet, OrthoFrame, PinholeCamera};
use log::{debug, info, warn};
use rayon::prelude::*;

use crate::output::OutputTree;

pub const MANIFEST: &str = "manifest.txt";
pub const CONFIG: &str = "config.txt";
pub const QUADS: &str = "quads.txt";

pub fn occluders_path(segment_id: u32) -> String {
    format!("occluders/facade_{segment_id}.txt")
}

pub fn ortho_path(segment_id: u32) -> String {
    format!("ortho/facade_{segment_id}.ppm")
}

pub fn balanced_path(segment_id: u32) -> String {
    format!("ortho/facade_{segment_id}_awb.ppm")
}

pub fn holes_path(segment_id: u32) -> String {
    format!("ortho/facade_{segment_id}_holes.pgm")
}

pub fn sidecar_path(segment_id: u32) -> String {
    format!("ortho/facade_{segment_id}.txt")
}

pub fn mask_path(segment_id: u32, camera: u32, kind: &str) -> String {
    format!("masks/facade_{segment_id}/cam_{camera:03}_{kind}.pgm")
}

/// Dataset file locations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub points: PathBuf,
    pub frames: PathBuf,
    pub cadastre: PathBuf,
    pub cameras: PathBuf,
}

impl DatasetPaths {
    /// The standard file names inside one directory.
    pub fn in_dir(dir: &Path) -> Self {
        use facademap_core::synth::layout;
        Self {
            points: dir.join(layout::POINTS),
            frames: dir.join(layout::FRAMES),
            cadastre: dir.join(layout::CADASTRE),
            cameras: dir.join(layout::CAMERAS),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Write stage timings into the manifest. Off by default so that reruns
    /// produce byte-identical trees.
    pub record_timings: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FacadeRecord {
    pub segment_id: u32,
    pub cluster_points: usize,
    pub occluders: usize,
    pub views: Vec<u32>,
    pub valid_pixels: usize,
    pub hole_pixels: usize,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub inputs: DatasetPaths,
    pub config: PipelineConfig,
    pub points: usize,
    pub hyper_points: usize,
    pub surface_points: usize,
    pub clusters: usize,
    pub unmatched_segments: Vec<u32>,
    pub facades: Vec<FacadeRecord>,
    /// `(stage, milliseconds)` in execution order.
    pub timings: Vec<(String, f64)>,
    /// Every file written by the run except the manifest, relative to the
    /// output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn to_text(&self, record_timings: bool) -> String {
        let mut s = String::from("# facademap run manifest\n");
        let _ = writeln!(s, "input.points {}", self.inputs.points.display());
        let _ = writeln!(s, "input.frames {}", self.inputs.frames.display());
        let _ = writeln!(s, "input.cadastre {}", self.inputs.cadastre.display());
        let _ = writeln!(s, "input.cameras {}", self.inputs.cameras.display());
        let _ = writeln!(s, "config {CONFIG}");
        let _ = writeln!(s, "count.points {}", self.points);
        let _ = writeln!(s, "count.hyper_points {}", self.hyper_points);
        let _ = writeln!(s, "count.surface_points {}", self.surface_points);
        let _ = writeln!(s, "count.clusters {}", self.clusters);
        let _ = writeln!(s, "count.quads {}", self.facades.len());
        let unmatched: Vec<String> = self.unmatched_segments.iter().map(u32::to_string).collect();
        let _ = writeln!(s, "segments.without_cluster {}", unmatched.join(" "));
        for f in &self.facades {
            let views: Vec<String> = f.views.iter().map(u32::to_string).collect();
            let _ = writeln!(
                s,
                "facade {} cluster_points {} occluders {} views [{}] valid_pixels {} hole_pixels {}",
                f.segment_id,
                f.cluster_points,
                f.occluders,
                views.join(" "),
                f.valid_pixels,
                f.hole_pixels
            );
        }
        if record_timings {
            for (stage, ms) in &self.timings {
                let _ = writeln!(s, "timing.{stage}_ms {ms:.3}");
            }
        }
        for o in &self.outputs {
            let _ = writeln!(s, "output {o}");
        }
        s
    }
}

struct Timer {
    stages: Vec<(String, f64)>,
    last: Instant,
}

impl Timer {
    fn new() -> Self {
        Self {
            stages: Vec::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        let ms = (now - self.last).as_secs_f64() * 1e3;
        debug!("stage {stage}: {ms:.1} ms");
        self.stages.push((stage.to_string(), ms));
        self.last = now;
    }
}

/// Per-facade products held in memory before export.
pub struct FacadeProducts {
    pub fit: FacadeFit,
    pub cluster_points: usize,
    pub occluders: OccluderSet,
    /// `(camera id, hard mask, soft mask)` for every selected view.
    pub masks: Vec<(u32, facademap_core::BinaryMask, facademap_core::SoftMask)>,
    pub texture: OrthoFrame,
    pub balanced: OrthoFrame,
}

fn process_facade(
    ds: &Dataset,
    cameras: &[PinholeCamera],
    cluster: &facademap_core::FacadeCluster,
    cfg: &PipelineConfig,
) -> Result<FacadeProducts> {
    let segment = ds
        .cadastre
        .iter()
        .find(|s| s.id == cluster.segment_id)
        .expect("clusters come from cadastre segments");
    let fit = fit_facade(&ds.points, cluster, segment, &ds.frames, cfg)
        .with_context(|| format!("fit stage, facade {}", cluster.segment_id))?;
    let quad = fit.quad;
    let mut occluders = detect_occluding_points(&ds.points, &quad, cfg);
    if cfg.cube_dilation_enabled {
        occluders = cube_dilate(&occluders, cfg.cube_half_edge);
    }
    let views = select_views(cameras, &quad, cfg.view_min_frac);
    let per_view: Vec<_> = views
        .par_iter()
        .map(|v| {
            let cam = &cameras[v.camera];
            let (hard, soft) = occlusion_masks(cam, &occluders, cfg);
            let layer = rectify_view(cam, v, &ds.cameras[v.camera].image, &hard, &soft, &quad, cfg.ortho_gsd)
                .with_context(|| format!("texturing stage, facade {}", quad.segment_id))?;
            Ok((ds.cameras[v.camera].id, hard, soft, layer))
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = OrthoGrid::for_quad(&quad, cfg.ortho_gsd)?;
    let layers: Vec<_> = per_view.iter().map(|(_, _, _, l)| l.clone()).collect();
    let texture = mosaic(grid, &layers).with_context(|| format!("mosaic stage, facade {}", quad.segment_id))?;
    let balanced = gray_world_balance(&texture);
    Ok(FacadeProducts {
        cluster_points: cluster.count(),
        fit,
        occluders,
        masks: per_view.into_iter().map(|(id, h, s, _)| (id, h, s)).collect(),
        texture,
        balanced,
    })
}

fn occluders_text(occ: &OccluderSet) -> String {
    let mut s = String::from("# x y z source\n");
    for p in &occ.points {
        let src = match p.source {
            PointSource::Measured { index } => index.to_string(),
            PointSource::CubeSynthetic => "cube".to_string(),
        };
        let _ = writeln!(s, "{} {} {} {}", p.position.x, p.position.y, p.position.z, src);
    }
    s
}

fn sidecar_text(p: &FacadeProducts) -> String {
    let q = &p.fit.quad;
    let g = &p.texture.grid;
    let mut s = String::new();
    let _ = writeln!(s, "segment_id {}", q.segment_id);
    let _ = writeln!(s, "e1 {} {}", q.e1.x, q.e1.y);
    let _ = writeln!(s, "e2 {} {}", q.e2.x, q.e2.y);
    let _ = writeln!(s, "z_bottom {}", q.z_bottom);
    let _ = writeln!(s, "z_top {}", q.z_top);
    let _ = writeln!(s, "plane {} {} {}", q.plane.nx, q.plane.ny, q.plane.d);
    let _ = writeln!(s, "gsd {}", g.gsd);
    let _ = writeln!(s, "size {} {}", g.cols, g.rows);
    let _ = writeln!(s, "valid_pixels {}", p.texture.valid_count());
    let _ = writeln!(s, "hole_pixels {}", p.texture.hole_count());
    let _ = writeln!(s, "top_msd {}", p.fit.profile.msd);
    let _ = writeln!(s, "lod {}", q.lod.as_str());
    let _ = writeln!(s, "rms_residual {}", p.fit.rms_residual);
    s
}

/// In-memory result of the processing stages.
pub struct PipelineResult {
    pub dataset: Dataset,
    pub hyper_points: usize,
    pub surface_points: usize,
    pub clusters: usize,
    pub unmatched_segments: Vec<u32>,
    pub facades: Vec<FacadeProducts>,
    pub timings: Vec<(String, f64)>,
}

/// Runs every processing stage on a loaded dataset. Facades are processed in
/// parallel and returned in segment id order.
pub fn process(dataset: Dataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    let mut timer = Timer::new();
    let grid = build_accumulation_map(&dataset.points, cfg.grid_step).context("accumulation stage")?;
    let split = split_hyper_points(&grid);
    timer.lap("accumulation");
    info!("{} hyper-points, {} surface points", split.hyper.len(), split.surface.len());

    let clusters = extract_facade_clusters(&split.hyper, &dataset.points, &dataset.cadastre, cfg)
        .context("extract stage")?;
    timer.lap("extract");
    let unmatched: Vec<u32> = dataset
        .cadastre
        .iter()
        .map(|s| s.id)
        .filter(|id| !clusters.iter().any(|c| c.segment_id == *id))
        .collect();
    for id in &unmatched {
        warn!("segment {id}: not enough facade points, no model");
    }

    let cameras: Vec<PinholeCamera> = dataset.cameras.iter().map(|c| c.camera).collect();
    let facades = clusters
        .par_iter()
        .map(|c| process_facade(&dataset, &cameras, c, cfg))
        .collect::<Result<Vec<_>>>()?;
    timer.lap("facades");
    Ok(PipelineResult {
        hyper_points: split.hyper.len(),
        surface_points: split.surface.len(),
        clusters: clusters.len(),
        unmatched_segments: unmatched,
        facades,
        timings: timer.stages,
        dataset,
    })
}

fn export(result: &PipelineResult, cfg: &PipelineConfig, out: &mut OutputTree) -> Result<Vec<FacadeRecord>> {
    out.text(CONFIG, &cfg.to_text())?;
    let quads: Vec<_> = result.facades.iter().map(|f| f.fit.quad).collect();
    out.text(QUADS, &format_quads(&quads))?;
    let mut records = Vec::new();
    for f in &result.facades {
        let id = f.fit.quad.segment_id;
        let first = out.written().len();
        out.text(&occluders_path(id), &occluders_text(&f.occluders))?;
        for (cam, hard, soft) in &f.masks {
            out.gray(&mask_path(id, *cam, "hard"), &hard.to_gray())?;
            out.gray(&mask_path(id, *cam, "soft"), &soft.to_gray())?;
        }
        out.rgb(&ortho_path(id), &f.texture.to_image())?;
        out.rgb(&balanced_path(id), &f.balanced.to_image())?;
        out.gray(&holes_path(id), &export_hole_map(&f.texture).to_gray())?;
        out.text(&sidecar_path(id), &sidecar_text(f))?;
        records.push(FacadeRecord {
            segment_id: id,
            cluster_points: f.cluster_points,
            occluders: f.occluders.len(),
            views: f.masks.iter().map(|m| m.0).collect(),
            valid_pixels: f.texture.valid_count(),
            hole_pixels: f.texture.hole_count(),
            outputs: out.written()[first..].to_vec(),
        });
    }
    Ok(records)
}

/// Loads the dataset, runs all stages and writes the results under `out`.
/// On failure every file written so far is removed.
pub fn run_pipeline(
    inputs: &DatasetPaths,
    cfg: &PipelineConfig,
    out: &Path,
    opts: &RunOptions,
) -> Result<RunManifest> {
    cfg.validate().context("configuration")?;
    let started = Instant::now();
    let dataset = load_dataset(&inputs.points, &inputs.frames, &inputs.cadastre, &inputs.cameras)
        .context("load stage")?;
    let load_ms = started.elapsed().as_secs_f64() * 1e3;
    info!(
        "loaded {} points, {} frames, {} segments, {} cameras",
        dataset.points.len(),
        dataset.frames.len(),
        dataset.cadastre.len(),
        dataset.cameras.len()
    );
    let points = dataset.points.len();
    let result = process(dataset, cfg)?;

    let mut tree = OutputTree::new(out)?;
    let export_started = Instant::now();
    let facades = match export(&result, cfg, &mut tree) {
        Ok(f) => f,
        Err(e) => {
            tree.discard();
            return Err(e.context("export stage"));
        }
    };
    let mut timings = vec![("load".to_string(), load_ms)];
    timings.extend(result.timings.iter().cloned());
    timings.push(("export".to_string(), export_started.elapsed().as_secs_f64() * 1e3));
    let manifest = RunManifest {
        inputs: inputs.clone(),
        config: cfg.clone(),
        points,
        hyper_points: result.hyper_points,
        surface_points: result.surface_points,
        clusters: result.clusters,
        unmatched_segments: result.unmatched_segments.clone(),
        facades,
        timings,
        outputs: tree.written().to_vec(),
    };
    if let Err(e) = tree.text(MANIFEST, &manifest.to_text(opts.record_timings)) {
        tree.discard();
        return Err(e.context("writing manifest"));
    }
    Ok(manifest)
}

/// Reads `input.points` and friends back from a manifest.
pub fn manifest_inputs(run_dir: &Path) -> Result<DatasetPaths> {
    let path = run_dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let get = |key: &str| -> Result<PathBuf> {
        text.lines()
            .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
            .map(PathBuf::from)
            .ok_or_else(|| anyhow!("{}: missing {key}", path.display()))
    };
    Ok(DatasetPaths {
        points: get("input.points")?,
        frames: get("input.frames")?,
        cadastre: get("input.cadastre")?,
        cameras: get("input.cameras")?,
    })
}
