use std::path::Path;

use anyhow::{Context, Result};
use facademap_core::synth::{simulate, write_simulation, SceneSpec};

/// Scene specs shipped with the tool, by name.
pub const BUILTIN_SCENES: &[(&str, &str)] = &[
    ("street-tree", include_str!("../scenes/street-tree.scene")),
    ("six-facades", include_str!("../scenes/six-facades.scene")),
];

/// Scene text for a file path or a built-in scene name.
pub fn scene_source(spec: &str) -> Result<(String, String)> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Some((_, text)) = BUILTIN_SCENES.iter().find(|(name, _)| *name == spec) {
            return Ok((text.to_string(), format!("builtin:{spec}")));
        }
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading scene {spec}"))?;
    Ok((text, spec.to_string()))
}

/// Simulates the scene `spec` (path or built-in name) into `out`.
pub fn simulate_scene(spec: &str, seed: u64, out: &Path) -> Result<SceneSpec> {
    let (text, origin) = scene_source(spec)?;
    let scene = SceneSpec::parse(&text, Path::new(&origin))?;
    let sim = simulate(&scene, seed)?;
    log::info!(
        "{} laser points, {} frames, {} images",
        sim.scan.points.len(),
        sim.scan.frames.len(),
        sim.views.len()
    );
    write_simulation(&scene, &text, &sim, out)?;
    Ok(scene)
}
