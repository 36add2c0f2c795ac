//! Randomized invariants of the building blocks, each checked against a
//! naive oracle.

use std::collections::{HashMap, HashSet, VecDeque};

use proptest::prelude::*;

use nnsc::clustering::aggregate;
use nnsc::image::{LabImage, LabelMap, PatchSpec, PixelPos};
use nnsc::io::{label_map_to_csv, parse_label_csv};
use nnsc::metrics::{asa, GroundTruth};
use nnsc::state::{enforce_connectivity, relabel_dense};

fn label_map(max_side: usize, max_label: u32) -> impl Strategy<Value = LabelMap> {
    (1..=max_side, 1..=max_side).prop_flat_map(move |(w, h)| {
        proptest::collection::vec(0..max_label, w * h)
            .prop_map(move |labels| LabelMap::new(w, h, labels).unwrap())
    })
}

fn map_pair(max_side: usize) -> impl Strategy<Value = (LabelMap, LabelMap)> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        (
            proptest::collection::vec(0u32..6, w * h),
            proptest::collection::vec(0u32..3, w * h),
        )
            .prop_map(move |(a, b)| {
                (LabelMap::new(w, h, a).unwrap(), LabelMap::new(w, h, b).unwrap())
            })
    })
}

/// Number of 4-connected pieces of each label, by flood fill.
fn pieces_per_label(map: &LabelMap) -> HashMap<u32, usize> {
    let (w, h) = (map.width(), map.height());
    let l = map.labels();
    let mut seen = vec![false; w * h];
    let mut out = HashMap::new();
    for s in 0..w * h {
        if seen[s] {
            continue;
        }
        *out.entry(l[s]).or_insert(0) += 1;
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(i) = q.pop_front() {
            let (x, y) = (i % w, i / w);
            let mut nbrs = Vec::with_capacity(4);
            if x > 0 {
                nbrs.push(i - 1);
            }
            if x + 1 < w {
                nbrs.push(i + 1);
            }
            if y > 0 {
                nbrs.push(i - w);
            }
            if y + 1 < h {
                nbrs.push(i + w);
            }
            for j in nbrs {
                if !seen[j] && l[j] == l[i] {
                    seen[j] = true;
                    q.push_back(j);
                }
            }
        }
    }
    out
}

fn permuted(map: &LabelMap, perm: &[u32]) -> LabelMap {
    let labels = map.labels().iter().map(|&l| perm[l as usize]).collect();
    LabelMap::new(map.width(), map.height(), labels).unwrap()
}

fn shuffled_ids(n: usize, seed: u64) -> Vec<u32> {
    // Fisher-Yates driven by a small LCG; ids spread out to leave gaps.
    let mut ids: Vec<u32> = (0..n as u32).map(|i| i * 3 + 1).collect();
    let mut s = seed | 1;
    for i in (1..n).rev() {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ids.swap(i, (s >> 33) as usize % (i + 1));
    }
    ids
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn patch_distances_are_symmetric_metrics_on_self(
        w in 1usize..12, h in 1usize..12, side in prop::sample::select(vec![1usize, 3, 5, 7]),
        seed in any::<u64>(), ax in 0usize..12, ay in 0usize..12, bx in 0usize..12, by in 0usize..12,
    ) {
        let mut s = seed;
        let data: Vec<f32> = (0..w * h * 3).map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((s >> 40) % 1000) as f32 / 10.0
        }).collect();
        let img = LabImage::new(w, h, 3, data).unwrap();
        let spec = PatchSpec::new(side).unwrap();
        let a = PixelPos::new(ax % w, ay % h);
        let b = PixelPos::new(bx % w, by % h);
        let d_ab = img.patch_distance(a, b, spec);
        prop_assert!(d_ab >= 0.0);
        prop_assert_eq!(d_ab, img.patch_distance(b, a, spec));
        prop_assert_eq!(img.patch_msd(a, b, spec), img.patch_msd(b, a, spec));
        prop_assert_eq!(img.patch_distance(a, a, spec), 0.0);
        // Oracle: explicit patch vectors.
        let (pa, pb) = (img.patch_at(a, spec), img.patch_at(b, spec));
        let ssd: f64 = pa.iter().zip(&pb).map(|(u, v)| ((u - v) as f64).powi(2)).sum();
        let n = spec.n() as f64;
        prop_assert!((d_ab - ssd.sqrt() / n).abs() <= 1e-4 * (1.0 + d_ab));
        prop_assert!((img.patch_msd(a, b, spec) - ssd / n).abs() <= 1e-4 * (1.0 + ssd / n));
    }

    #[test]
    fn asa_is_a_fraction_and_one_iff_nested((map, gt_map) in map_pair(9)) {
        let gt = GroundTruth::from_label_map(&gt_map);
        let score = asa(&map, &gt).unwrap();
        prop_assert!((0.0..=1.0).contains(&score));
        let mut region_of: HashMap<u32, HashSet<u32>> = HashMap::new();
        for (&s, &g) in map.labels().iter().zip(gt_map.labels()) {
            region_of.entry(s).or_default().insert(g);
        }
        let nested = region_of.values().all(|r| r.len() == 1);
        prop_assert_eq!(score == 1.0, nested);
    }

    #[test]
    fn asa_ignores_relabeling((map, gt_map) in map_pair(9), s1 in any::<u64>(), s2 in any::<u64>()) {
        let base = asa(&map, &GroundTruth::from_label_map(&gt_map)).unwrap();
        let pm = permuted(&map, &shuffled_ids(6, s1));
        let pg = GroundTruth::from_label_map(&permuted(&gt_map, &shuffled_ids(3, s2)));
        prop_assert_eq!(asa(&pm, &pg).unwrap(), base);
    }

    #[test]
    fn merging_never_raises_and_splitting_never_lowers_asa(
        (map, gt_map) in map_pair(9), a in 0u32..6, b in 0u32..6, cut in any::<prop::sample::Index>(),
    ) {
        let gt = GroundTruth::from_label_map(&gt_map);
        let base = asa(&map, &gt).unwrap();
        let merged: Vec<u32> = map.labels().iter().map(|&l| if l == b { a } else { l }).collect();
        let merged = LabelMap::new(map.width(), map.height(), merged).unwrap();
        prop_assert!(asa(&merged, &gt).unwrap() <= base);

        // Split label `a`: pixels of `a` from raster position `cut` on get a fresh id.
        let start = cut.index(map.len());
        let split: Vec<u32> = map.labels().iter().enumerate()
            .map(|(i, &l)| if l == a && i >= start { 100 } else { l }).collect();
        let split = LabelMap::new(map.width(), map.height(), split).unwrap();
        prop_assert!(asa(&split, &gt).unwrap() >= base);
    }

    #[test]
    fn connectivity_output_is_connected_dense_and_coarser(map in label_map(14, 4), min_size in 1usize..10) {
        let out = enforce_connectivity(&map, min_size);
        let pieces = pieces_per_label(&out);
        prop_assert!(pieces.values().all(|&n| n == 1), "disconnected labels: {pieces:?}");
        let n = out.num_labels();
        prop_assert_eq!(out.distinct_labels(), n);
        prop_assert_eq!(relabel_dense(&out), out.clone());

        // Input components are never cut.
        let comps = enforce_connectivity(&map, 1);
        let mut owner: HashMap<u32, u32> = HashMap::new();
        for (&c, &o) in comps.labels().iter().zip(out.labels()) {
            prop_assert_eq!(*owner.entry(c).or_insert(o), o);
        }

        // Small regions survive only when nothing is left to merge with.
        let mut sizes = vec![0usize; n];
        for &l in out.labels() {
            sizes[l as usize] += 1;
        }
        prop_assert!(n == 1 || sizes.iter().all(|&s| s >= min_size), "sizes {sizes:?}");
    }

    #[test]
    fn connectivity_with_unit_threshold_counts_components(map in label_map(14, 3)) {
        let out = enforce_connectivity(&map, 1);
        let total: usize = pieces_per_label(&map).values().sum();
        prop_assert_eq!(out.num_labels(), total);
    }

    #[test]
    fn aggregating_copies_returns_the_map(map in label_map(10, 50), copies in 1usize..5) {
        let maps = vec![map.clone(); copies];
        prop_assert_eq!(aggregate(&maps).unwrap(), map);
    }

    #[test]
    fn csv_round_trip(map in label_map(10, u32::MAX)) {
        let text = label_map_to_csv(&map);
        prop_assert_eq!(parse_label_csv(&text, std::path::Path::new("p.csv")).unwrap(), map);
    }
}
