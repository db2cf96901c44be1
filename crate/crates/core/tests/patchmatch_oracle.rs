mod common;

use common::{exhaustive_nnf, nnf_stats, patch_distance};
use deepir::nnf::{patchmatch, PatchMatchParams, PatchMetric};
use deepir::synth::{random_feature_map, scene};
use deepir::Raster;

#[test]
fn distances_agree_with_reference_metric() {
    let q = random_feature_map(1, 12, 12, 4, 1);
    let s = random_feature_map(1, 12, 10, 4, 2);
    for metric in [PatchMetric::default(), PatchMetric { radius: 2, normalize: false }] {
        let f = patchmatch(&q, &s, &PatchMatchParams { metric, ..Default::default() }).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let (a, b) = f.get(i, j);
                let d = patch_distance(&q, &s, i, j, a, b, metric);
                assert!((d - f.distance_at(i, j)).abs() <= 1e-12 * d.max(1.0));
            }
        }
    }
}

#[test]
fn never_beats_the_exhaustive_optimum_and_improves_with_iterations() {
    let metric = PatchMetric::default();
    for seed in 0..5 {
        let q = random_feature_map(1, 12, 12, 4, 10 + seed);
        let s = random_feature_map(1, 12, 10, 4, 20 + seed);
        let optimum = exhaustive_nnf(&q, &s, metric);
        let mut previous = f64::INFINITY;
        for iterations in [1, 5, 50] {
            let f = patchmatch(&q, &s, &PatchMatchParams { iterations, seed, metric }).unwrap();
            assert!(f.distances().iter().zip(&optimum).all(|(d, o)| *d >= *o - 1e-12));
            let stats = nnf_stats(&f, &optimum);
            assert!(stats.mean_ratio <= previous);
            previous = stats.mean_ratio;
        }
        assert!(previous < 1.1);
    }
}

#[test]
fn recovers_a_translated_crop_exactly() {
    let img = scene(40, 56, 9).to_planes();
    let crop = img.crop_columns(10, 40).unwrap();
    let f = patchmatch(&crop, &img, &PatchMatchParams::default()).unwrap();
    let optimum = exhaustive_nnf(&crop, &img, PatchMetric::default());
    assert!(f.distances().iter().all(|&d| d == 0.0));
    assert!(optimum.iter().all(|&d| d == 0.0));
}
