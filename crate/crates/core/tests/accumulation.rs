use std::collections::HashMap;

use facademap_core::{build_accumulation_map, split_hyper_points, Point3, PointRecord};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn records(xy: &[(f64, f64)]) -> Vec<PointRecord> {
    xy.iter()
        .map(|&(x, y)| PointRecord {
            point: Point3::new(x, y, 0.0),
            frame_id: 0,
        })
        .collect()
}

/// Cell scores and hyper flags recomputed point by point with a hash map.
fn recount(points: &[PointRecord], origin: (f64, f64), step: f64) -> (HashMap<(i64, i64), u32>, Vec<bool>) {
    let key = |p: &PointRecord| {
        (
            ((p.point.x - origin.0) / step).floor() as i64,
            ((p.point.y - origin.1) / step).floor() as i64,
        )
    };
    let mut counts = HashMap::new();
    for p in points {
        *counts.entry(key(p)).or_insert(0u32) += 1;
    }
    let hyper = points.iter().map(|p| counts[&key(p)] > 1).collect();
    (counts, hyper)
}

#[test]
fn matches_a_brute_force_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let n = rng.gen_range(1..3000);
        let spread = rng.gen_range(0.1..20.0);
        let xy: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen_range(-spread..spread), rng.gen_range(-spread..spread)))
            .collect();
        let pts = records(&xy);
        let grid = build_accumulation_map(&pts, 0.05).unwrap();
        let (counts, hyper) = recount(&pts, grid.origin(), 0.05);
        let (nu, nv) = grid.dims();
        let mut occupied = 0;
        for v in 0..nv {
            for u in 0..nu {
                let expected = counts.get(&(u as i64, v as i64)).copied().unwrap_or(0);
                assert_eq!(grid.score(u, v), expected);
                occupied += (expected > 0) as usize;
            }
        }
        assert_eq!(occupied, counts.len());
        let split = split_hyper_points(&grid);
        let mask = split.hyper_mask(pts.len());
        assert_eq!(mask, hyper);
    }
}

fn dyadic_cloud() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-640i32..640, -640i32..640), 1..300)
        .prop_map(|v| v.into_iter().map(|(a, b)| (a as f64 / 64.0, b as f64 / 64.0)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permutation_keeps_scores_and_partition(xy in dyadic_cloud(), seed in any::<u64>()) {
        let pts = records(&xy);
        let mut order: Vec<usize> = (0..pts.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let shuffled: Vec<_> = order.iter().map(|&i| pts[i]).collect();
        let a = build_accumulation_map(&pts, 0.0625).unwrap();
        let b = build_accumulation_map(&shuffled, 0.0625).unwrap();
        prop_assert_eq!(a.dims(), b.dims());
        let (nu, nv) = a.dims();
        for v in 0..nv {
            for u in 0..nu {
                prop_assert_eq!(a.score(u, v), b.score(u, v));
            }
        }
        let ha = split_hyper_points(&a).hyper_mask(pts.len());
        let hb = split_hyper_points(&b).hyper_mask(pts.len());
        for (k, &i) in order.iter().enumerate() {
            prop_assert_eq!(hb[k], ha[i]);
        }
    }

    #[test]
    fn grid_aligned_translation_keeps_scores(xy in dyadic_cloud(), du in -50i32..50, dv in -50i32..50) {
        let step = 0.0625;
        let pts = records(&xy);
        let moved: Vec<_> = xy.iter().map(|&(x, y)| (x + du as f64 * step, y + dv as f64 * step)).collect();
        let a = build_accumulation_map(&pts, step).unwrap();
        let b = build_accumulation_map(&records(&moved), step).unwrap();
        prop_assert_eq!(a.dims(), b.dims());
        let (nu, nv) = a.dims();
        for v in 0..nv {
            for u in 0..nu {
                prop_assert_eq!(a.score(u, v), b.score(u, v));
            }
        }
        prop_assert_eq!(split_hyper_points(&a), split_hyper_points(&b));
    }
}
