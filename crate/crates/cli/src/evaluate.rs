//! Metrics of a pipeline run against simulator ground truth.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use facademap_core::eval::{
    occlusion_recall, planimetric_deviation, texture_error, true_occluders, DeviationStats, FacadeMetrics,
};
use facademap_core::ingest::{load_config, parse_points, parse_quads, read_gray, read_image, PipelineConfig};
use facademap_core::synth::{layout, read_labels, true_quads, truth_texture, SceneSpec};
use facademap_core::texturing::OrthoGrid;
use facademap_core::{FacadeQuad, OrthoFrame};

use crate::pipeline::{holes_path, manifest_inputs, occluders_path, ortho_path, CONFIG, QUADS};

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub deviation: DeviationStats,
    pub facades: Vec<FacadeMetrics>,
    pub report: String,
}

fn load_texture(run_dir: &Path, quad: &FacadeQuad, gsd: f64) -> Result<OrthoFrame> {
    let grid = OrthoGrid::for_quad(quad, gsd)?;
    let img = read_image(run_dir.join(ortho_path(quad.segment_id)))?;
    let holes = read_gray(run_dir.join(holes_path(quad.segment_id)))?;
    if (img.width, img.height) != (grid.cols, grid.rows) || (holes.width, holes.height) != (grid.cols, grid.rows) {
        bail!(
            "facade {}: texture is {}x{}, expected {}x{}",
            quad.segment_id,
            img.width,
            img.height,
            grid.cols,
            grid.rows
        );
    }
    let mut frame = OrthoFrame::empty(grid);
    for i in 0..grid.len() {
        if holes.data[i] == 0 {
            frame.rgb[i] = [img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2]];
            frame.source[i] = Some(0);
        }
    }
    Ok(frame)
}

/// Measured point indices listed in an occluders file.
fn load_detected(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let src = line.split_whitespace().nth(3).unwrap_or("");
        if src != "cube" {
            out.push(
                src.parse()
                    .with_context(|| format!("{}: bad source {src:?}", path.display()))?,
            );
        }
    }
    Ok(out)
}

/// Compares the run in `run_dir` with the truth in `truth_dir`.
///
/// The truth directory must hold a quads file. When it also holds the scene
/// text and point labels, texture and occluder detection metrics are added.
pub fn evaluate(run_dir: &Path, truth_dir: &Path) -> Result<Evaluation> {
    let est = parse_quads(&run_dir.join(QUADS))?;
    let truth = parse_quads(&truth_dir.join(layout::TRUTH_QUADS))?;
    let deviation = planimetric_deviation(&est, &truth)?;

    let cfg_path = run_dir.join(CONFIG);
    let cfg = if cfg_path.exists() {
        load_config(&cfg_path)?
    } else {
        PipelineConfig::default()
    };
    let scene_path = truth_dir.join(layout::TRUTH_SCENE);
    let scene = if scene_path.exists() {
        Some(SceneSpec::load(&scene_path)?)
    } else {
        None
    };
    let labels_path = truth_dir.join(layout::TRUTH_LABELS);
    let labelled = if labels_path.exists() {
        let labels = read_labels(&labels_path)?;
        let points = parse_points(&manifest_inputs(run_dir)?.points)?;
        if labels.len() != points.len() {
            bail!("{} labels for {} points", labels.len(), points.len());
        }
        Some((points, labels))
    } else {
        None
    };
    let scene_quads = scene.as_ref().map(true_quads).transpose()?;

    let mut facades = Vec::new();
    for q in &est {
        let mut m = FacadeMetrics {
            segment_id: q.segment_id,
            texture: None,
            detection: None,
        };
        if let Some(scene) = &scene {
            let frame = load_texture(run_dir, q, cfg.ortho_gsd)?;
            let reference = truth_texture(scene, q.segment_id, &frame.grid)?;
            m.texture = Some(texture_error(&frame, &reference)?);
        }
        if let (Some((points, labels)), Some(tq)) = (&labelled, &scene_quads) {
            let true_quad = tq
                .iter()
                .find(|t| t.segment_id == q.segment_id)
                .context("estimated facade missing from scene")?;
            let detected = load_detected(&run_dir.join(occluders_path(q.segment_id)))?;
            let expected = true_occluders(points, labels, true_quad, &cfg);
            m.detection = Some(occlusion_recall(&detected, &expected));
        }
        facades.push(m);
    }
    let report = facademap_core::eval::format_report(&deviation, &facades);
    Ok(Evaluation {
        deviation,
        facades,
        report,
    })
}
