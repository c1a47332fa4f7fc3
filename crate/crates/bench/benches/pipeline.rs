use criterion::{black_box, criterion_group, criterion_main, Criterion};
use facademap_bench::street;
use facademap_core::accumulation::{build_accumulation_map, split_hyper_points};
use facademap_core::extract::extract_facade_clusters;
use facademap_core::masking::{disc_dilate, disc_erode, BinaryMask};
use facademap_core::synth::{build_camera, render_view, simulate_laser, simulate_cadastre};
use facademap_core::PipelineConfig;

fn laser(c: &mut Criterion) {
    let scene = street();
    c.bench_function("simulate_laser", |b| b.iter(|| simulate_laser(black_box(&scene), 1).unwrap()));
}

fn accumulation(c: &mut Criterion) {
    let scene = street();
    let scan = simulate_laser(&scene, 1).unwrap();
    let cadastre = simulate_cadastre(&scene, 1).unwrap();
    let cfg = PipelineConfig::default();
    c.bench_function("accumulation_map", |b| {
        b.iter(|| build_accumulation_map(black_box(&scan.points), 0.05).unwrap())
    });
    let grid = build_accumulation_map(&scan.points, 0.05).unwrap();
    let split = split_hyper_points(&grid);
    c.bench_function("extract_clusters", |b| {
        b.iter(|| extract_facade_clusters(black_box(&split.hyper), &scan.points, &cadastre, &cfg).unwrap())
    });
}

fn morphology(c: &mut Criterion) {
    let mask = BinaryMask::from_fn(480, 270, |x, y| (x * 7 + y * 13) % 97 == 0 && x > 100 && x < 300);
    c.bench_function("disc_dilate_50", |b| b.iter(|| disc_dilate(black_box(&mask), 50)));
    let grown = disc_dilate(&mask, 50);
    c.bench_function("disc_erode_20", |b| b.iter(|| disc_erode(black_box(&grown), 20)));
}

fn render(c: &mut Criterion) {
    let scene = street();
    let cam = build_camera(&scene, &scene.cameras[0]).unwrap();
    c.bench_function("render_480x270", |b| b.iter(|| render_view(black_box(&scene), &cam, [1.0; 3])));
}

criterion_group!(benches, laser, accumulation, morphology, render);
criterion_main!(benches);
