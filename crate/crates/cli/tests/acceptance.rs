//! Acceptance checks. Each criterion prints one `PASS` or `FAIL` line.
//!
//! Run with `cargo test -p facademap-cli --test acceptance`.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use facademap_cli::pipeline::{process, PipelineResult};
use facademap_cli::BUILTIN_SCENES;
use facademap_core::accumulation::{build_accumulation_map, split_hyper_points};
use facademap_core::eval::{occlusion_recall, planimetric_deviation, texture_error, true_occluders};
use facademap_core::extract::extract_facade_clusters;
use facademap_core::fit::{bottom_altitude, fit_facade};
use facademap_core::ingest::{CameraEntry, Dataset};
use facademap_core::masking::{disc_dilate, disc_erode, rasterize_points, BinaryMask};
use facademap_core::occlusion::detect_occluding_points;
use facademap_core::synth::{simulate, true_quads, truth_texture, CadastreNoise, SceneSpec, Simulation};
use facademap_core::texturing::{export_hole_map, gray_world_balance, rectify_view, select_views};
use facademap_core::{FacadeCluster, PipelineConfig, Point3, PointRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LASER_SIGMA: f64 = 0.03;

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
    /// Set when the criterion cannot hold for any correct implementation.
    infeasible: Option<String>,
}

fn outcome(id: &'static str, title: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        title,
        pass,
        detail,
        infeasible: None,
    }
}

fn builtin(name: &str) -> SceneSpec {
    let text = BUILTIN_SCENES.iter().find(|(n, _)| *n == name).unwrap().1;
    SceneSpec::parse(text, Path::new(name)).unwrap()
}

fn scene(text: &str) -> SceneSpec {
    SceneSpec::parse(text, Path::new("acceptance")).unwrap()
}

fn dataset(sim: &Simulation) -> Dataset {
    Dataset {
        points: sim.scan.points.clone(),
        frames: sim.scan.frames.iter().map(|f| (f.frame_id, *f)).collect(),
        cadastre: sim.cadastre.clone(),
        cameras: sim
            .views
            .iter()
            .enumerate()
            .map(|(k, v)| CameraEntry {
                id: k as u32,
                camera: v.camera,
                image_path: PathBuf::from(format!("cam_{k}.ppm")),
                image: v.image.clone(),
            })
            .collect(),
    }
}

fn run(scene: &SceneSpec, seed: u64, cfg: &PipelineConfig) -> (Simulation, PipelineResult) {
    let sim = simulate(scene, seed).unwrap();
    let result = process(dataset(&sim), cfg).unwrap();
    (sim, result)
}

fn clusters_of(points: &[PointRecord], cadastre: &[facademap_core::Segment2], cfg: &PipelineConfig) -> Vec<FacadeCluster> {
    let grid = build_accumulation_map(points, cfg.grid_step).unwrap();
    let split = split_hyper_points(&grid);
    extract_facade_clusters(&split.hyper, points, cadastre, cfg).unwrap()
}

fn criterion_1() -> Outcome {
    let cfg = PipelineConfig::default();
    let scene = builtin("six-facades");
    let started = Instant::now();
    let (_, result) = run(&scene, 2024, &cfg);
    let secs = started.elapsed().as_secs_f64();
    let est: Vec<_> = result.facades.iter().map(|f| f.fit.quad).collect();
    let truth = true_quads(&scene).unwrap();
    let dev = match planimetric_deviation(&est, &truth) {
        Ok(d) => d,
        Err(e) => return outcome("1", "planimetric deviation", false, e.to_string()),
    };

    // Same scene with the endpoint noise drawn in x and y instead of along
    // the normal; reported for reference only.
    let mut iso = scene.clone();
    iso.cadastre_noise_mode = CadastreNoise::Isotropic;
    let (_, iso_result) = run(&iso, 2024, &cfg);
    let iso_est: Vec<_> = iso_result.facades.iter().map(|f| f.fit.quad).collect();
    let iso_dev = planimetric_deviation(&iso_est, &truth).map(|d| d.mean).unwrap_or(f64::NAN);

    outcome(
        "1",
        "planimetric deviation (6 facades, cadastre noise 0.3 m)",
        dev.per_facade.len() == 6 && dev.mean <= 0.10 && dev.max <= 0.30 && secs <= 60.0,
        format!(
            "mean {:.4} m (<= 0.10), max {:.4} m (<= 0.30), {} facades, {:.2} s; isotropic endpoint noise: mean {:.4} m",
            dev.mean,
            dev.max,
            dev.per_facade.len(),
            secs,
            iso_dev
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut discrepancies = 0usize;
    for _ in 0..50 {
        let n = rng.gen_range(1..=10_000);
        let spread: f64 = rng.gen_range(0.05..30.0);
        let cx: f64 = rng.gen_range(-1e4..1e4);
        let cy: f64 = rng.gen_range(-1e4..1e4);
        let points: Vec<PointRecord> = (0..n)
            .map(|_| PointRecord {
                point: Point3::new(
                    cx + rng.gen_range(-spread..spread),
                    cy + rng.gen_range(-spread..spread),
                    rng.gen_range(0.0..10.0),
                ),
                frame_id: 0,
            })
            .collect();
        let grid = build_accumulation_map(&points, 0.05).unwrap();
        let (ox, oy) = grid.origin();
        let key = |p: &PointRecord| {
            (
                ((p.point.x - ox) / 0.05).floor() as i64,
                ((p.point.y - oy) / 0.05).floor() as i64,
            )
        };
        let mut counts: HashMap<(i64, i64), u32> = HashMap::new();
        for p in &points {
            *counts.entry(key(p)).or_default() += 1;
        }
        let (nu, nv) = grid.dims();
        for v in 0..nv {
            for u in 0..nu {
                let want = counts.get(&(u as i64, v as i64)).copied().unwrap_or(0);
                discrepancies += (grid.score(u, v) != want) as usize;
            }
        }
        discrepancies += counts.keys().filter(|&&(u, v)| u < 0 || v < 0 || u >= nu as i64 || v >= nv as i64).count();
        let hyper = split_hyper_points(&grid).hyper_mask(points.len());
        discrepancies += points.iter().zip(&hyper).filter(|(p, &h)| h != (counts[&key(p)] > 1)).count();
    }
    outcome(
        "2",
        "accumulation map vs brute-force recount (50 clouds)",
        discrepancies == 0,
        format!("{discrepancies} discrepancies"),
    )
}

const SINGLE_FACADE: &str = "
traj_start = -2 0
traj_length = 24
frame_spacing = 0.2
laser_noise = 0.03
[facade]
id = 1
p1 = 0 4
p2 = 20 4
top = 6
";

fn criterion_3() -> Outcome {
    let cfg = PipelineConfig::default();
    let mut notes = Vec::new();
    let mut pass = true;

    let flat = scene(SINGLE_FACADE);
    let (_, r) = run(&flat, 31, &cfg);
    let q = r.facades[0].fit.quad;
    let ok = q.lod == facademap_core::LodFlag::Smooth && (q.z_top - 6.0).abs() <= 2.0 * LASER_SIGMA;
    pass &= ok;
    notes.push(format!("flat top {:.3} ({}, msd {:.4})", q.z_top, q.lod.as_str(), q.msd));

    let mut jagged = flat.clone();
    jagged.facades[0].crenel_amplitude = 1.0;
    jagged.facades[0].crenel_period = 2.0;
    let (_, r) = run(&jagged, 32, &cfg);
    let q = r.facades[0].fit.quad;
    let ok = q.lod == facademap_core::LodFlag::Detailed && (q.z_top - 7.0).abs() <= 2.0 * LASER_SIGMA;
    pass &= ok;
    notes.push(format!("jagged top {:.3} vs 7 ({}, msd {:.3})", q.z_top, q.lod.as_str(), q.msd));

    // bottom, with and without 70% of the lower wall points
    let sim = simulate(&flat, 33).unwrap();
    let ds = dataset(&sim);
    let clusters = clusters_of(&ds.points, &ds.cadastre, &cfg);
    let cluster = &clusters[0];
    let fit = fit_facade(&ds.points, cluster, &ds.cadastre[0], &ds.frames, &cfg).unwrap();
    let true_bottom = flat.ground_z + flat.curb_height;
    let mut lower_seen = 0usize;
    let thinned = FacadeCluster {
        segment_id: cluster.segment_id,
        point_indices: cluster
            .point_indices
            .iter()
            .copied()
            .filter(|&i| {
                if ds.points[i].point.z >= 2.0 {
                    return true;
                }
                lower_seen += 1;
                lower_seen % 10 >= 7
            })
            .collect(),
    };
    let removed = cluster.count() - thinned.count();
    let z_thin = bottom_altitude(&ds.points, &thinned, &ds.frames, &cfg).unwrap();
    let ok = (fit.quad.z_bottom - true_bottom).abs() <= 0.05 && z_thin == fit.quad.z_bottom;
    pass &= ok;
    notes.push(format!(
        "bottom {:.3} vs {:.3}, {:.3} after deleting {removed} lower points",
        fit.quad.z_bottom, true_bottom, z_thin
    ));
    outcome("3", "altimetric rules", pass, notes.join("; "))
}

fn criterion_4() -> Outcome {
    let cfg = PipelineConfig::default();
    let scene = builtin("street-tree");
    let sim = simulate(&scene, 44).unwrap();
    let ds = dataset(&sim);
    let clusters = clusters_of(&ds.points, &ds.cadastre, &cfg);
    let truth = true_quads(&scene).unwrap();
    let mut notes = Vec::new();
    let mut pass = !clusters.is_empty();
    for c in &clusters {
        let seg = ds.cadastre.iter().find(|s| s.id == c.segment_id).unwrap();
        let quad = fit_facade(&ds.points, c, seg, &ds.frames, &cfg).unwrap().quad;
        let occ = detect_occluding_points(&ds.points, &quad, &cfg);
        let detected = occ.measured_indices();
        let tq = truth.iter().find(|t| t.segment_id == c.segment_id).unwrap();
        let expected = true_occluders(&ds.points, &sim.scan.labels, tq, &cfg);
        let score = occlusion_recall(&detected, &expected);
        let (recall, precision) = (score.recall.unwrap_or(0.0), score.precision.unwrap_or(0.0));
        let wall_hits = c
            .point_indices
            .iter()
            .filter(|&&i| quad.plane.signed_distance(ds.points[i].point).abs() < cfg.occ_d_min)
            .filter(|i| detected.binary_search(i).is_ok())
            .count();
        pass &= recall >= 0.90 && precision >= 0.90 && wall_hits == 0;
        notes.push(format!(
            "facade {}: recall {recall:.4}, precision {precision:.4} ({} detected, {} true), {wall_hits} wall points in occluder set",
            c.segment_id,
            detected.len(),
            expected.len()
        ));
    }
    outcome("4", "occluder detection (tree and post)", pass, notes.join("; "))
}

fn opening(m: &BinaryMask, r: u32) -> BinaryMask {
    disc_dilate(&disc_erode(m, r), r)
}

fn criterion_5() -> Vec<Outcome> {
    let mut out = Vec::new();

    // (a) single pixel through dilate 50 / erode 20
    let size = 161;
    let mut seed = BinaryMask::new(size, size);
    seed.set(80, 80, true);
    let result = disc_erode(&disc_dilate(&seed, 50), 20);
    let d30 = BinaryMask::from_fn(size, size, |x, y| {
        let (dx, dy) = (x as i64 - 80, y as i64 - 80);
        dx * dx + dy * dy <= 900
    });
    let d20: Vec<(i64, i64)> = (-20i64..=20)
        .flat_map(|dy| (-20i64..=20).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| dx * dx + dy * dy <= 400)
        .collect();
    let oracle = BinaryMask::from_fn(size, size, |x, y| {
        d20.iter().all(|(dx, dy)| {
            let (px, py) = (x as i64 - 80 + dx, y as i64 - 80 + dy);
            px * px + py * py <= 2500
        })
    });
    let extra: Vec<(u32, u32)> = (0..size)
        .flat_map(|y| (0..size).map(move |x| (x, y)))
        .filter(|&(x, y)| result.get(x, y) && !d30.get(x, y))
        .collect();
    let mut a = outcome(
        "5a",
        "single-pixel dilate 50 / erode 20 equals D30",
        result == d30,
        format!(
            "result {} px, |D30| {} px, brute-force Minkowski oracle {} ({} px); first extra offset ({}, {})",
            result.count(),
            d30.count(),
            if result == oracle { "matches bit-exactly" } else { "DIFFERS" },
            oracle.count(),
            extra.first().map_or(0, |p| p.0 as i64 - 80),
            extra.first().map_or(0, |p| p.1 as i64 - 80),
        ),
    );
    if result != d30 && result == oracle {
        a.infeasible = Some(
            "on the integer lattice D50 eroded by D20 strictly contains D30; e.g. offset (29, 8) has norm > 30 yet every D20 translate of it stays inside D50"
                .into(),
        );
    }
    out.push(a);

    // (b) projected occluder pixels stay covered by the final hard mask
    let cfg = PipelineConfig::default();
    let scene = builtin("street-tree");
    let (sim, result) = run(&scene, 45, &cfg);
    let mut uncovered = 0usize;
    let mut seeds = 0usize;
    for f in &result.facades {
        for (cam, hard, _) in &f.masks {
            let raster = rasterize_points(&sim.views[*cam as usize].camera, &f.occluders);
            seeds += raster.count();
            uncovered += raster.count() - raster.bits().iter().zip(hard.bits()).filter(|(a, b)| **a && **b).count();
        }
    }
    out.push(outcome(
        "5b",
        "projected occluder pixels covered by the hard mask",
        uncovered == 0 && seeds > 0,
        format!("{seeds} seed pixels, {uncovered} uncovered"),
    ));

    // (c) idempotence of the opening on random masks
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut broken = 0;
    for k in 0..20 {
        let (w, h) = (rng.gen_range(60..200), rng.gen_range(60..200));
        let density = rng.gen_range(0.2..0.9);
        let mut m = BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(density));
        if k % 2 == 0 {
            m = disc_dilate(&m, 2);
        }
        for r in [20u32, 50, 3] {
            let once = opening(&m, r);
            if opening(&once, r) != once {
                broken += 1;
            }
        }
    }
    out.push(outcome(
        "5c",
        "opening idempotence on 20 random masks (r = 3, 20, 50)",
        broken == 0,
        format!("{broken} non-idempotent cases"),
    ));
    out
}

const TWO_CAMERAS: &str = "
traj_start = -2 0
traj_length = 12
frame_spacing = 0.1
laser_noise = 0.03
image_width = 960
image_height = 540
[facade]
id = 1
p1 = 0 8
p2 = 8 8
top = 5.5
texture = checkerboard
cell = 1
palette = 190 170 140 120 110 95
[occluder]
kind = cylinder
center = 4 4
radius = 0.3
z_min = 0
z_max = 4.5
albedo = 40 90 40
[camera]
position = -2 -4 2.5
target = 4 8 2.8
[camera]
position = 10 -4 2.5
target = 4 8 2.8
";

fn criterion_6() -> Vec<Outcome> {
    let cfg = PipelineConfig::default();
    let sc = scene(TWO_CAMERAS);
    let (_, r) = run(&sc, 61, &cfg);
    let f = &r.facades[0];
    let truth = truth_texture(&sc, 1, &f.texture.grid).unwrap();
    let err = texture_error(&f.texture, &truth).unwrap();
    let mae = err.mae.unwrap_or(f64::INFINITY);
    let a = outcome(
        "6a",
        "two-camera mosaic without holes",
        err.hole_frac == 0.0 && mae <= 10.0,
        format!(
            "hole fraction {:.4}, MAE {:.3} / 255 (<= 10), views {:?}, occluder points {}",
            err.hole_frac,
            mae,
            f.masks.iter().map(|m| m.0).collect::<Vec<_>>(),
            f.occluders.len()
        ),
    );

    let mut one = sc.clone();
    one.cameras.truncate(1);
    let (sim, r) = run(&one, 62, &cfg);
    let f = &r.facades[0];
    let quad = f.fit.quad;
    let cams: Vec<_> = sim.views.iter().map(|v| v.camera).collect();
    let views = select_views(&cams, &quad, cfg.view_min_frac);
    let (hard, soft) = facademap_core::masking::occlusion_masks(&cams[0], &f.occluders, &cfg);
    let layer = rectify_view(&cams[0], &views[0], &sim.views[0].image, &hard, &soft, &quad, cfg.ortho_gsd).unwrap();
    let holes = export_hole_map(&f.texture);
    let fixture = BinaryMask::from_fn(layer.grid.cols, layer.grid.rows, |x, y| {
        !layer.valid[y as usize * layer.grid.cols as usize + x as usize]
    });
    let b = outcome(
        "6b",
        "single-camera hole map equals the invalid layer pixels",
        holes == fixture && fixture.count() > 0,
        format!("{} hole pixels, {} invalid layer pixels", holes.count(), fixture.count()),
    );
    vec![a, b]
}

fn criterion_7() -> Outcome {
    let cfg = PipelineConfig::default();
    let mut sc = scene(TWO_CAMERAS);
    sc.cameras.truncate(1);
    sc.occluders.clear();
    sc.cameras[0].gain = [1.0, 1.2, 1.0];
    let (_, r) = run(&sc, 71, &cfg);
    let f = &r.facades[0];
    let means = |frame: &facademap_core::OrthoFrame| {
        let mut sum = [0.0; 3];
        let mut n = 0.0;
        for (rgb, s) in frame.rgb.iter().zip(&frame.source) {
            if s.is_some() {
                for k in 0..3 {
                    sum[k] += rgb[k] as f64;
                }
                n += 1.0;
            }
        }
        sum.map(|v| v / n)
    };
    let before = means(&f.texture);
    let balanced = gray_world_balance(&f.texture);
    let after = means(&balanced);
    let spread = after.iter().cloned().fold(f64::MIN, f64::max) - after.iter().cloned().fold(f64::MAX, f64::min);
    outcome(
        "7",
        "gray-world balance after green gain 1.2",
        spread <= 1.0 && f.texture.valid_count() > 0,
        format!(
            "channel means before ({:.1}, {:.1}, {:.1}), after ({:.2}, {:.2}, {:.2}), spread {:.3} LSB",
            before[0], before[1], before[2], after[0], after[1], after[2], spread
        ),
    )
}

fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn run_cli(dir: &Path, threads: usize, args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_facademap"))
        .current_dir(dir)
        .arg("--threads")
        .arg(threads.to_string())
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&status.stderr).into_owned())
    }
}

fn criterion_8() -> Outcome {
    let trees: Vec<_> = [1usize, 4]
        .iter()
        .map(|&threads| {
            let dir = tempfile::tempdir().unwrap();
            let steps: [&[&str]; 3] = [
                &["simulate", "street-tree", "--out", "sim", "--seed", "8"],
                &["run-pipeline", "sim", "--out", "run"],
                &["evaluate", "run", "sim/truth", "--out", "eval/metrics.txt"],
            ];
            for step in steps {
                run_cli(dir.path(), threads, step)?;
            }
            Ok::<_, String>((read_tree(dir.path()), dir))
        })
        .collect();
    let (a, b) = match (&trees[0], &trees[1]) {
        (Ok(a), Ok(b)) => (&a.0, &b.0),
        (Err(e), _) | (_, Err(e)) => return outcome("8", "deterministic output trees", false, e.clone()),
    };
    let differing: Vec<_> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    outcome(
        "8",
        "byte-identical output trees with --threads 1 and 4",
        differing.is_empty() && !a.is_empty(),
        format!("{} files compared, {} differ {:?}", a.len(), differing.len(), differing),
    )
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; ignore them,
    // but honour `--list` so test discovery does not run the suite.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let started = Instant::now();
    let mut outcomes = vec![criterion_1(), criterion_2(), criterion_3(), criterion_4()];
    outcomes.extend(criterion_5());
    outcomes.extend(criterion_6());
    outcomes.push(criterion_7());
    outcomes.push(criterion_8());

    let mut unexpected = 0;
    for o in &outcomes {
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:<3} {status}  {}: {}", o.id, o.title, o.detail);
        if let Some(why) = &o.infeasible {
            println!("              not attainable as stated: {why}");
        } else if !o.pass {
            unexpected += 1;
        }
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!(
        "acceptance: {passed}/{} passed in {:.1} s",
        outcomes.len(),
        started.elapsed().as_secs_f64()
    );
    if unexpected > 0 {
        std::process::exit(1);
    }
}
